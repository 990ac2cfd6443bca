#pragma once

#include <string>
#include <vector>

#include "utopic/diffmath/ops.hpp"
#include "utopic/diffmath/params.hpp"

namespace utopic::diffmath {

enum class Activation { none, leaky_relu, sigmoid };

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::leaky_relu;
};

/// A stack of affine layers stored in a ParamStore as `<prefix>.<i>.weight`
/// (in x out) and `<prefix>.<i>.bias` (1 x out).
struct MlpSpec {
  std::string prefix;
  std::vector<LayerSpec> layers;

  /// widths = {in, h1, ..., out}; hidden layers use leaky-ReLU, the last
  /// layer uses `last`.
  static MlpSpec chain(std::string prefix, const std::vector<std::size_t>& widths,
                       Activation last = Activation::none) {
    if (widths.size() < 2) throw ContractError("MlpSpec::chain: need at least input and output widths");
    MlpSpec s{std::move(prefix), {}};
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      s.layers.push_back({widths[i], widths[i + 1], i + 2 == widths.size() ? last : Activation::leaky_relu});
    }
    return s;
  }

  std::string weight_name(std::size_t i) const { return prefix + "." + std::to_string(i) + ".weight"; }
  std::string bias_name(std::size_t i) const { return prefix + "." + std::to_string(i) + ".bias"; }
  std::size_t in_width() const { return layers.front().in; }
  std::size_t out_width() const { return layers.back().out; }
};

template <class Rng>
void init_mlp(ParamStore& store, const MlpSpec& spec, Rng& rng) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    store.set(spec.weight_name(i), he_uniform(l.in, l.out, l.in, rng));
    store.set(spec.bias_name(i), Tensor(1, l.out));
  }
}

inline Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::none:
      return x;
    case Activation::leaky_relu:
      return leaky_relu(x, 0.01);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  return x;
}

/// Applies the MLP to every row of x (n x d_in -> n x d_out).
inline Var mlp_forward(Graph& g, const ParamStore& store, const MlpSpec& spec, Var x) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (x.cols() != l.in) {
      throw DimensionError(spec.prefix + " layer " + std::to_string(i) + ": expects width " + std::to_string(l.in) +
                           ", got " + std::to_string(x.cols()));
    }
    Var w = g.param(store, spec.weight_name(i));
    Var b = g.param(store, spec.bias_name(i));
    if (w.rows() != l.in || w.cols() != l.out) throw DimensionError(spec.prefix + ": stored weight has wrong shape");
    x = activate(add_row(matmul(x, w), b), l.activation);
  }
  return x;
}

/// Convenience overload for plain evaluation outside a training graph.
inline Tensor mlp_forward(const ParamStore& store, const MlpSpec& spec, const Tensor& x) {
  Graph g;
  return mlp_forward(g, store, spec, g.constant(x)).value();
}

}  // namespace utopic::diffmath
