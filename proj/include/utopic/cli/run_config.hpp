#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "utopic/dataset/storage.hpp"
#include "utopic/json_util.hpp"
#include "utopic/network/config.hpp"
#include "utopic/training/trainer.hpp"

namespace utopic::cli {

/// Everything a command needs besides file paths. Loaded from one JSON file
/// whose sections mirror the library configs; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t samples = 64;      // pairs written by generate / trained on by train
  std::size_t val_samples = 16;  // held-out pairs train scores each epoch
  dataset::GenConfig generate;
  network::ModelConfig model;
  training::TrainConfig train;
  std::vector<double> sweep_keep{0.75, 0.684, 0.625, 0.586, 0.547};
  std::size_t sweep_pairs = 16;  // pairs per sweep bucket
};

inline Json to_json(const RunConfig& c) {
  Json train = training::to_json(c.train);
  return Json{{"seed", c.seed},
              {"samples", c.samples},
              {"val_samples", c.val_samples},
              {"generate", dataset::to_json(c.generate)},
              {"model", network::to_json(c.model)},
              {"train", train},
              {"sweep", {{"keep_fractions", c.sweep_keep}, {"pairs_per_bucket", c.sweep_pairs}}}};
}

inline RunConfig run_config_from_json(const Json& j) {
  require_known_keys(j, {"seed", "samples", "val_samples", "generate", "model", "train", "sweep"}, "config");
  RunConfig c;
  read_opt(j, "seed", c.seed);
  read_opt(j, "samples", c.samples);
  read_opt(j, "val_samples", c.val_samples);
  if (j.contains("generate")) c.generate = dataset::gen_config_from_json(j.at("generate"));
  if (j.contains("model")) c.model = network::model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = training::train_config_from_json(j.at("train"));
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    require_known_keys(s, {"keep_fractions", "pairs_per_bucket"}, "sweep");
    read_opt(s, "keep_fractions", c.sweep_keep);
    read_opt(s, "pairs_per_bucket", c.sweep_pairs);
  }
  if (c.sweep_keep.empty()) throw ContractError("sweep: keep_fractions must not be empty");
  if (c.sweep_pairs < 1) throw ContractError("sweep: pairs_per_bucket must be >= 1");
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  if (path.empty()) return {};
  try {
    return run_config_from_json(read_json_file(path));
  } catch (const ContractError& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

}  // namespace utopic::cli
