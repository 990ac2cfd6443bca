#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "utopic/dataset/pair.hpp"
#include "utopic/geom3d/io.hpp"
#include "utopic/json_util.hpp"

namespace utopic::dataset {

namespace fs = std::filesystem;

inline constexpr int kSampleFormatVersion = 1;

inline Json to_json(const GenConfig& c) {
  return Json{{"points_per_cloud", c.points_per_cloud}, {"keep_fraction", c.keep_fraction},
              {"rot_range_deg", c.rot_range_deg},       {"trans_range", c.trans_range},
              {"noise_sigma", c.noise_sigma},           {"noise_clip", c.noise_clip},
              {"shuffle", c.shuffle},                   {"match_radius", c.match_radius}};
}

inline GenConfig gen_config_from_json(const Json& j, GenConfig c = {}) {
  require_known_keys(j,
                     {"points_per_cloud", "keep_fraction", "rot_range_deg", "trans_range", "noise_sigma", "noise_clip",
                      "shuffle", "match_radius"},
                     "generate");
  read_opt(j, "points_per_cloud", c.points_per_cloud);
  read_opt(j, "keep_fraction", c.keep_fraction);
  read_opt(j, "rot_range_deg", c.rot_range_deg);
  read_opt(j, "trans_range", c.trans_range);
  read_opt(j, "noise_sigma", c.noise_sigma);
  read_opt(j, "noise_clip", c.noise_clip);
  read_opt(j, "shuffle", c.shuffle);
  read_opt(j, "match_radius", c.match_radius);
  c.validate();
  return c;
}

inline Json transform_to_json(const RigidTransform& t) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  return Json{{"rotation", rot}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

inline RigidTransform transform_from_json(const Json& j) {
  RigidTransform t;
  const auto& rot = j.at("rotation");
  const auto& tr = j.at("translation");
  if (rot.size() != 9 || tr.size() != 3) throw IoError("transform: expected 9 rotation and 3 translation values");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot.at(r * 3 + c).get<double>();
  for (int k = 0; k < 3; ++k) t.translation[k] = tr.at(k).get<double>();
  return t;
}

inline Json vec3_json(const geom3d::Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

struct SampleMeta {
  std::uint64_t seed = 0;
  std::size_t index = 0;
  GenConfig config;
};

/// meta.json keys, in file order:
///   format, version, index, seed, family, num_source, num_target,
///   gt_transform {rotation[9] row-major, translation[3]}, overlap_ratio,
///   gt_matches [[i, j], ...], gt_overlap_source [0/1...],
///   gt_overlap_target [0/1...], crop {rule, independent_directions,
///   source_normal, target_normal, kept}, euler_convention, config {...}
inline Json sample_meta_json(const PairSample& s, const SampleMeta& meta) {
  Json matches = Json::array();
  for (auto [i, j] : s.gt_correspondence.matches()) matches.push_back({i, j});
  return Json{{"format", "utopic.sample"},
              {"version", kSampleFormatVersion},
              {"index", meta.index},
              {"seed", meta.seed},
              {"family", s.family},
              {"num_source", s.source.size()},
              {"num_target", s.target.size()},
              {"gt_transform", transform_to_json(s.gt_transform)},
              {"overlap_ratio", overlap_ratio(s)},
              {"gt_matches", matches},
              {"gt_overlap_source", s.gt_overlap_source},
              {"gt_overlap_target", s.gt_overlap_target},
              {"crop",
               {{"rule", "halfspace-top-fraction"},
                {"independent_directions", true},
                {"source_normal", vec3_json(s.crop.source_normal)},
                {"target_normal", vec3_json(s.crop.target_normal)},
                {"kept", s.crop.kept}}},
              {"euler_convention", geom3d::kEulerConvention},
              {"config", to_json(meta.config)}};
}

/// Writes source.ply, target.ply, complete_source.ply, complete_target.ply
/// and meta.json into `dir` (created if missing).
inline void write_sample(const fs::path& dir, const PairSample& s, const SampleMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  geom3d::write_ply(dir / "source.ply", s.source);
  geom3d::write_ply(dir / "target.ply", s.target);
  geom3d::write_ply(dir / "complete_source.ply", s.complete_source);
  geom3d::write_ply(dir / "complete_target.ply", s.complete_target);
  write_json_file(dir / "meta.json", sample_meta_json(s, meta));
}

/// Checks the fixed meta.json layout; throws IoError naming the first problem.
inline void validate_sample_meta(const Json& j) {
  const char* required[] = {"format",        "version",        "index",           "seed",
                            "family",        "num_source",     "num_target",      "gt_transform",
                            "overlap_ratio", "gt_matches",     "gt_overlap_source", "gt_overlap_target",
                            "crop",          "euler_convention", "config"};
  for (const char* k : required)
    if (!j.contains(k)) throw IoError(std::string("meta.json: missing key '") + k + "'");
  if (j.at("format") != "utopic.sample") throw IoError("meta.json: wrong format tag");
  if (j.at("version").get<int>() != kSampleFormatVersion) throw IoError("meta.json: unsupported version");
  const auto n = j.at("num_source").get<std::size_t>();
  const auto m = j.at("num_target").get<std::size_t>();
  if (j.at("gt_overlap_source").size() != n || j.at("gt_overlap_target").size() != m) {
    throw IoError("meta.json: overlap label length does not match point counts");
  }
  for (const auto& pair : j.at("gt_matches")) {
    if (pair.size() != 2 || pair[0].get<std::size_t>() >= n || pair[1].get<std::size_t>() >= m) {
      throw IoError("meta.json: gt_matches entry out of range");
    }
  }
  transform_from_json(j.at("gt_transform"));
}

inline PairSample read_sample(const fs::path& dir) {
  const Json meta = read_json_file(dir / "meta.json");
  validate_sample_meta(meta);
  PairSample s;
  s.source = geom3d::read_ply(dir / "source.ply");
  s.target = geom3d::read_ply(dir / "target.ply");
  if (fs::exists(dir / "complete_source.ply")) s.complete_source = geom3d::read_ply(dir / "complete_source.ply");
  if (fs::exists(dir / "complete_target.ply")) s.complete_target = geom3d::read_ply(dir / "complete_target.ply");
  if (s.source.size() != meta.at("num_source").get<std::size_t>() ||
      s.target.size() != meta.at("num_target").get<std::size_t>()) {
    throw IoError(dir.string() + ": point files disagree with meta.json counts");
  }
  s.gt_transform = transform_from_json(meta.at("gt_transform"));
  s.family = meta.at("family").get<std::string>();
  s.gt_correspondence = SlackCorrespondenceMatrix::zeros(s.source.size(), s.target.size());
  std::vector<bool> row_used(s.source.size(), false), col_used(s.target.size(), false);
  for (const auto& pair : meta.at("gt_matches")) {
    const auto i = pair[0].get<std::size_t>();
    const auto j = pair[1].get<std::size_t>();
    s.gt_correspondence(i, j) = 1.0;
    row_used[i] = col_used[j] = true;
  }
  for (std::size_t i = 0; i < row_used.size(); ++i)
    if (!row_used[i]) s.gt_correspondence(i, s.target.size()) = 1.0;
  for (std::size_t j = 0; j < col_used.size(); ++j)
    if (!col_used[j]) s.gt_correspondence(s.source.size(), j) = 1.0;
  s.gt_overlap_source = meta.at("gt_overlap_source").get<std::vector<int>>();
  s.gt_overlap_target = meta.at("gt_overlap_target").get<std::vector<int>>();
  const auto& crop = meta.at("crop");
  for (int k = 0; k < 3; ++k) {
    s.crop.source_normal[k] = crop.at("source_normal").at(k).get<double>();
    s.crop.target_normal[k] = crop.at("target_normal").at(k).get<double>();
  }
  s.crop.kept = crop.at("kept").get<std::size_t>();
  return s;
}

/// Sample directories of a dataset root, sorted by name.
inline std::vector<fs::path> list_samples(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a dataset directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "meta.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string sample_dir_name(std::size_t index) {
  std::string s = std::to_string(index);
  return "sample_" + std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

}  // namespace utopic::dataset
