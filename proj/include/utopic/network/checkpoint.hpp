#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "utopic/json_util.hpp"
#include "utopic/network/model.hpp"

namespace utopic::network {

/// File layout (little endian):
///   "UTOPICKP" | u32 version | u64 header bytes | JSON header |
///   u64 tensor count | per tensor: u32 name bytes, name, u32 rank,
///   u64 extent * rank, f64 data (row-major)
/// The JSON header holds {"dims": {V, d_t, N_iter, K}, "model": {...}}.
inline constexpr std::array<char, 8> kCheckpointMagic{'U', 'T', 'O', 'P', 'I', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace detail

inline Json checkpoint_header(const ModelConfig& c) {
  return Json{{"dims",
               {{"V", c.feature_dim}, {"d_t", c.transformer_dim}, {"N_iter", c.n_iter}, {"K", c.samples}}},
              {"model", to_json(c)}};
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = checkpoint_header(model.config()).dump();
  detail::put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put<std::uint64_t>(out, model.params.tensors().size());
  for (const auto& [name, t] : model.params.tensors()) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) detail::put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// Model config stored in the checkpoint header.
inline ModelConfig read_checkpoint_config(std::istream& in, const std::string& where) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointError(where + ": not a model checkpoint (bad magic)");
  }
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(where + ": checkpoint version " + std::to_string(version) + ", this build reads version " +
                          std::to_string(kCheckpointVersion));
  }
  const auto bytes = detail::get<std::uint64_t>(in, "header size");
  if (bytes > (1u << 24)) throw CheckpointError(where + ": implausible header size");
  std::string header(bytes, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(bytes))) throw CheckpointError(where + ": truncated header");
  try {
    return model_config_from_json(Json::parse(header).at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": bad header: " + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(where + ": bad header: " + e.what());
  }
}

/// Loads a checkpoint. With `expected`, a dimension mismatch is an error
/// naming the first differing field.
inline Model load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const ModelConfig cfg = read_checkpoint_config(in, path.string());
  if (expected) {
    const Json a = to_json(*expected), b = to_json(cfg);
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (b.at(it.key()) != it.value()) {
        throw CheckpointError(path.string() + ": checkpoint has " + it.key() + "=" + b.at(it.key()).dump() +
                              " but the config asks for " + it.value().dump());
      }
    }
  }
  Model model(cfg, ParamStore{});
  const ParamStore reference = init_model(model.layout, 0);
  const auto count = detail::get<std::uint64_t>(in, "tensor count");
  ParamStore store;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = detail::get<std::uint32_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError(path.string() + ": truncated tensor name");
    const auto rank = detail::get<std::uint32_t>(in, "rank");
    if (rank > 8) throw CheckpointError(path.string() + ": implausible rank for " + name);
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& e : shape) {
      e = detail::get<std::uint64_t>(in, "extent");
      total *= e;
    }
    if (!reference.contains(name)) throw CheckpointError(path.string() + ": unexpected tensor '" + name + "'");
    if (reference.at(name).shape() != shape) {
      throw CheckpointError(path.string() + ": tensor '" + name + "' has shape mismatching the model dims");
    }
    std::vector<double> data(total);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * sizeof(double)))) {
      throw CheckpointError(path.string() + ": truncated data for " + name);
    }
    store.set(name, Tensor(shape, std::move(data)));
  }
  for (const auto& [name, t] : reference.tensors())
    if (!store.contains(name)) throw CheckpointError(path.string() + ": missing tensor '" + name + "'");
  model.params = std::move(store);
  return model;
}

}  // namespace utopic::network
