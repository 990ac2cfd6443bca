#pragma once

#include <string>
#include <vector>

#include "utopic/json_util.hpp"

namespace utopic::network {

/// Width of the rotation-invariant per-point input (see local_descriptors).
inline constexpr std::size_t kLocalDescriptorWidth = 11;

struct ModelConfig {
  std::size_t feature_dim = 64;      // V
  std::size_t transformer_dim = 64;  // d_t
  std::size_t n_iter = 3;
  std::size_t heads = 1;
  std::size_t ffn_mult = 2;
  std::size_t k_local = 16;
  std::vector<std::size_t> extractor_channels{64, 64, 128, 256};
  std::size_t extractor_hidden = 128;
  std::size_t samples = 50;  // K
  std::size_t sinkhorn_iters = 5;
  double slack_init = 0.0;
  std::size_t completion_points = 128;
  bool use_geometric = true;
  std::string extractor_input = "invariant";  // "invariant" or "xyz"

  void validate() const {
    if (feature_dim == 0 || transformer_dim == 0) throw ContractError("model: widths must be positive");
    if (n_iter < 1) throw ContractError("model: n_iter must be >= 1");
    if (heads < 1 || transformer_dim % heads != 0) throw ContractError("model: heads must divide transformer_dim");
    if (ffn_mult < 1) throw ContractError("model: ffn_mult must be >= 1");
    if (k_local < 1) throw ContractError("model: k_local must be >= 1");
    if (extractor_channels.empty()) throw ContractError("model: extractor needs at least one layer");
    if (samples < 2) throw ContractError("model: samples (K) must be >= 2");
    if (sinkhorn_iters < 1) throw ContractError("model: sinkhorn_iters must be >= 1");
    if (completion_points < 1) throw ContractError("model: completion_points must be >= 1");
    if (extractor_input != "invariant" && extractor_input != "xyz")
      throw ContractError("model: extractor_input must be 'invariant' or 'xyz'");
  }

  std::size_t extractor_concat_width() const {
    std::size_t s = 0;
    for (auto c : extractor_channels) s += c;
    return s;
  }
};

inline Json to_json(const ModelConfig& c) {
  return Json{{"feature_dim", c.feature_dim},
              {"transformer_dim", c.transformer_dim},
              {"n_iter", c.n_iter},
              {"heads", c.heads},
              {"ffn_mult", c.ffn_mult},
              {"k_local", c.k_local},
              {"extractor_channels", c.extractor_channels},
              {"extractor_hidden", c.extractor_hidden},
              {"samples", c.samples},
              {"sinkhorn_iters", c.sinkhorn_iters},
              {"slack_init", c.slack_init},
              {"completion_points", c.completion_points},
              {"use_geometric", c.use_geometric},
              {"extractor_input", c.extractor_input}};
}

inline ModelConfig model_config_from_json(const Json& j, ModelConfig c = {}) {
  require_known_keys(j,
                     {"feature_dim", "transformer_dim", "n_iter", "heads", "ffn_mult", "k_local", "extractor_channels",
                      "extractor_hidden", "samples", "sinkhorn_iters", "slack_init", "completion_points",
                      "use_geometric", "extractor_input"},
                     "model");
  read_opt(j, "feature_dim", c.feature_dim);
  read_opt(j, "transformer_dim", c.transformer_dim);
  read_opt(j, "n_iter", c.n_iter);
  read_opt(j, "heads", c.heads);
  read_opt(j, "ffn_mult", c.ffn_mult);
  read_opt(j, "k_local", c.k_local);
  read_opt(j, "extractor_channels", c.extractor_channels);
  read_opt(j, "extractor_hidden", c.extractor_hidden);
  read_opt(j, "samples", c.samples);
  read_opt(j, "sinkhorn_iters", c.sinkhorn_iters);
  read_opt(j, "slack_init", c.slack_init);
  read_opt(j, "completion_points", c.completion_points);
  read_opt(j, "use_geometric", c.use_geometric);
  read_opt(j, "extractor_input", c.extractor_input);
  c.validate();
  return c;
}

}  // namespace utopic::network
