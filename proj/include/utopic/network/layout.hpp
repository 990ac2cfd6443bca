#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "utopic/diffmath/mlp.hpp"
#include "utopic/network/config.hpp"
#include "utopic/rng.hpp"

namespace utopic::network {

using diffmath::Activation;
using diffmath::MlpSpec;
using diffmath::ParamStore;
using diffmath::Tensor;

/// Parameter names of one attention block (self or cross).
struct AttentionBlockSpec {
  std::string prefix;
  std::size_t dim = 0;
  std::size_t heads = 1;
  bool geometric = false;  // owns a W^G (3 x heads)
  MlpSpec ffn;

  std::string name(const char* leaf) const { return prefix + "." + leaf; }
};

struct TransformerSpec {
  std::string prefix;
  bool project = false;  // V != d_t
  MlpSpec in_proj, out_proj;
  std::vector<AttentionBlockSpec> self_blocks, cross_blocks;
};

/// Names and shapes of every parameter of the model.
struct ModelLayout {
  ModelConfig config;
  std::vector<std::size_t> extractor_in;  // input width per edge layer
  MlpSpec extractor_head;
  TransformerSpec tf1, tf2;
  MlpSpec mean_head, std_head, weighting, overlap_head, completion;

  static std::string edge_weight(std::size_t l) { return "ext." + std::to_string(l) + ".weight"; }
  static std::string edge_bias(std::size_t l) { return "ext." + std::to_string(l) + ".bias"; }
  static constexpr const char* kMatch1 = "match1.weight";
  static constexpr const char* kMatch2 = "match2.weight";

  explicit ModelLayout(const ModelConfig& c) : config(c) {
    c.validate();
    std::size_t in = c.extractor_input == "xyz" ? 3 : kLocalDescriptorWidth;
    for (auto ch : c.extractor_channels) {
      extractor_in.push_back(in);
      in = ch;
    }
    const std::size_t v = c.feature_dim;
    extractor_head = MlpSpec::chain("ext.head", {c.extractor_concat_width(), c.extractor_hidden, v});
    tf1 = transformer("tf1");
    tf2 = transformer("tf2");
    const std::size_t half = std::max<std::size_t>(v / 2, 1);
    mean_head = MlpSpec::chain("unc.mean", {v, half, 1});
    std_head = MlpSpec::chain("unc.std", {v, half, 1});
    weighting = MlpSpec::chain("weighting", {2 * v, v, v});
    overlap_head = MlpSpec::chain("overlap", {v, half, 1}, Activation::sigmoid);
    completion = MlpSpec::chain("completion", {v, 256, 3 * c.completion_points});
  }

 private:
  TransformerSpec transformer(const std::string& prefix) const {
    TransformerSpec t;
    t.prefix = prefix;
    const std::size_t d = config.transformer_dim;
    t.project = d != config.feature_dim;
    if (t.project) {
      t.in_proj = MlpSpec::chain(prefix + ".in", {config.feature_dim, d});
      t.out_proj = MlpSpec::chain(prefix + ".out", {d, config.feature_dim});
    }
    for (std::size_t k = 0; k < config.n_iter; ++k) {
      for (bool self : {true, false}) {
        AttentionBlockSpec b;
        b.prefix = prefix + "." + std::to_string(k) + (self ? ".self" : ".cross");
        b.dim = d;
        b.heads = config.heads;
        b.geometric = self;
        b.ffn = MlpSpec::chain(b.prefix + ".ffn", {d, config.ffn_mult * d, d});
        (self ? t.self_blocks : t.cross_blocks).push_back(std::move(b));
      }
    }
    return t;
  }
};

template <class R>
void init_attention_block(ParamStore& store, const AttentionBlockSpec& b, R& rng) {
  for (const char* w : {"wq", "wk", "wv"}) store.set(b.name(w), diffmath::fan_in_uniform(b.dim, b.dim, b.dim, rng));
  if (b.geometric) store.set(b.name("wg"), diffmath::fan_in_uniform(3, b.heads, 3, rng));
  for (const char* ln : {"ln1", "ln2"}) {
    store.set(b.prefix + "." + ln + ".gain", Tensor(1, b.dim, 1.0));
    store.set(b.prefix + "." + ln + ".bias", Tensor(1, b.dim, 0.0));
  }
  diffmath::init_mlp(store, b.ffn, rng);
}

template <class R>
void init_transformer(ParamStore& store, const TransformerSpec& t, R& rng) {
  if (t.project) {
    diffmath::init_mlp(store, t.in_proj, rng);
    diffmath::init_mlp(store, t.out_proj, rng);
  }
  for (std::size_t k = 0; k < t.self_blocks.size(); ++k) {
    init_attention_block(store, t.self_blocks[k], rng);
    init_attention_block(store, t.cross_blocks[k], rng);
  }
}

/// Fresh parameters. MLP and edge-layer weights are He uniform with zero
/// biases; attention and affinity projections are fan-in uniform; layer-norm
/// gains start at 1.
inline ParamStore init_model(const ModelLayout& layout, std::uint64_t seed) {
  Rng rng = stream_rng(seed, 0, 0x6d6f64656cULL);
  ParamStore store;
  const auto& c = layout.config;
  for (std::size_t l = 0; l < c.extractor_channels.size(); ++l) {
    const std::size_t in = layout.extractor_in[l], out = c.extractor_channels[l];
    store.set(ModelLayout::edge_weight(l), diffmath::he_uniform(2 * in, out, 2 * in, rng));
    store.set(ModelLayout::edge_bias(l), Tensor(1, out));
  }
  diffmath::init_mlp(store, layout.extractor_head, rng);
  init_transformer(store, layout.tf1, rng);
  init_transformer(store, layout.tf2, rng);
  const std::size_t v = c.feature_dim;
  // Identity start: the affinity begins as plain feature similarity.
  store.set(ModelLayout::kMatch1, Tensor::identity(v));
  store.set(ModelLayout::kMatch2, Tensor::identity(v));
  for (const MlpSpec* s : {&layout.mean_head, &layout.std_head, &layout.weighting, &layout.overlap_head,
                           &layout.completion})
    diffmath::init_mlp(store, *s, rng);
  return store;
}

}  // namespace utopic::network
