#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "utopic/geom3d/point_cloud.hpp"

namespace utopic::geom3d {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace detail {

inline void require_finite(const Vec3& p, const std::filesystem::path& path, std::size_t line) {
  if (!p.allFinite()) {
    throw IoError(path.string() + ": non-finite coordinate at point " + std::to_string(line));
  }
}

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t bytes = 0;
};

inline std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

inline double ply_read_scalar(const char* p, const std::string& t) {
  auto load = [p]<class T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return load(std::int8_t{});
  if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
  if (t == "short" || t == "int16") return load(std::int16_t{});
  if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
  if (t == "int" || t == "int32") return load(std::int32_t{});
  if (t == "uint" || t == "uint32") return load(std::uint32_t{});
  if (t == "float" || t == "float32") return load(float{});
  return load(double{});
}

}  // namespace detail

/// One "x y z" triple per line; blank lines and '#' comments are skipped.
inline PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PointCloud pc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tok[3];
    if (!(ss >> tok[0] >> tok[1] >> tok[2])) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected three coordinates");
    }
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      try {
        p[k] = std::stod(tok[k]);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok[k] + "'");
      }
    }
    detail::require_finite(p, path, lineno);
    pc.points.push_back(p);
  }
  return pc;
}

inline void write_xyz(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const auto& p : pc.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// Reads the vertex x/y/z of an ASCII or binary-little-endian PLY. Other
/// vertex properties are skipped; elements after the vertices are ignored.
inline PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": missing 'ply' magic");

  std::string format;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<detail::PlyProperty> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      ss >> format;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ss >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      } else if (!seen_vertex) {
        throw IoError(path.string() + ": elements before 'vertex' are not supported");
      }
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ss >> type;
      if (type == "list") throw IoError(path.string() + ": list properties on vertices are not supported");
      ss >> name;
      const std::size_t bytes = detail::ply_type_size(type);
      if (bytes == 0) throw IoError(path.string() + ": unknown property type '" + type + "'");
      props.push_back({name, type, bytes});
    } else if (word == "end_header") {
      break;
    }
  }
  if (!seen_vertex) throw IoError(path.string() + ": no vertex element");
  int ix = -1, iy = -1, iz = -1;
  std::size_t stride = 0;
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < props.size(); ++i) {
    offsets.push_back(stride);
    stride += props[i].bytes;
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw IoError(path.string() + ": vertex lacks x/y/z properties");

  PointCloud pc;
  pc.points.reserve(vertex_count);
  if (format == "binary_little_endian") {
    std::vector<char> buf(stride);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) {
        throw IoError(path.string() + ": truncated vertex data");
      }
      const std::array<int, 3> idx{ix, iy, iz};
      Vec3 p;
      for (int k = 0; k < 3; ++k) p[k] = detail::ply_read_scalar(buf.data() + offsets[idx[k]], props[idx[k]].type);
      detail::require_finite(p, path, v);
      pc.points.push_back(p);
    }
  } else if (format == "ascii") {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!std::getline(in, line)) throw IoError(path.string() + ": truncated vertex data");
      std::istringstream ss(line);
      std::vector<double> vals(props.size());
      for (auto& x : vals) {
        std::string tok;
        if (!(ss >> tok)) throw IoError(path.string() + ": short vertex line " + std::to_string(v));
        x = std::stod(tok);
      }
      Vec3 p(vals[ix], vals[iy], vals[iz]);
      detail::require_finite(p, path, v);
      pc.points.push_back(p);
    }
  } else {
    throw IoError(path.string() + ": unsupported PLY format '" + format + "'");
  }
  return pc;
}

/// Binary little-endian PLY with float x/y/z and optional uchar colours.
inline void write_ply(const std::filesystem::path& path, const PointCloud& pc,
                      const std::vector<std::array<std::uint8_t, 3>>* colors = nullptr) {
  if (colors && colors->size() != pc.size()) throw ContractError("write_ply: one colour per point required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << pc.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n";
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const float f = static_cast<float>(pc[i][k]);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
    if (colors) out.write(reinterpret_cast<const char*>((*colors)[i].data()), 3);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Dispatches on extension: .ply or anything else as XYZ text.
inline PointCloud load_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".ply") return read_ply(path);
  return read_xyz(path);
}

}  // namespace utopic::geom3d
