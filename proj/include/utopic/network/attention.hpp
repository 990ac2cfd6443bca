#pragma once

#include <cmath>
#include <vector>

#include "utopic/diffmath/mlp.hpp"
#include "utopic/embedding/relation.hpp"
#include "utopic/network/layout.hpp"

namespace utopic::network {

using diffmath::Graph;
using diffmath::Var;
namespace ops = diffmath;

/// The three embedding channels of one cloud recorded as graph constants.
struct RelationVars {
  Var rho, alpha, eta;

  static RelationVars record(Graph& g, const embedding::RelationEmbedding& e) {
    return {g.constant(e.rho), g.constant(e.alpha), g.constant(e.eta)};
  }
  std::size_t n() const { return rho.rows(); }
};

/// G(i, j) = g(i, j) . wg(:, head), an N x N bias on the attention logits.
inline Var relation_bias(const RelationVars& rel, const Var& wg, std::size_t head) {
  if (wg.rows() != 3 || head >= wg.cols()) throw ContractError("relation_bias: W^G must be 3 x heads");
  const Tensor& w = wg.value();
  const Tensor* ch[3] = {&rel.rho.value(), &rel.alpha.value(), &rel.eta.value()};
  Tensor out(rel.n(), rel.n());
  for (int c = 0; c < 3; ++c) {
    const double wc = w(c, head);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += wc * (*ch[c])[k];
  }
  return wg.graph()->record(std::move(out), {wg, rel.rho, rel.alpha, rel.eta},
                            [wg, rel, head](Graph& g, const Tensor& gy) {
                              Tensor* gw = g.grad_buffer(wg);
                              if (!gw) return;
                              const Tensor* ch[3] = {&rel.rho.value(), &rel.alpha.value(), &rel.eta.value()};
                              for (int c = 0; c < 3; ++c) {
                                double s = 0.0;
                                for (std::size_t k = 0; k < gy.size(); ++k) s += gy[k] * (*ch[c])[k];
                                (*gw)(c, head) += s;
                              }
                            });
}

inline void require_width(const Var& f, std::size_t d, const char* what) {
  if (f.cols() != d) {
    throw ContractError(std::string(what) + ": features have width " + std::to_string(f.cols()) + ", block expects " +
                        std::to_string(d));
  }
}

/// Pre-softmax scores of one head: ((x_i Wq)(y_j Wk)^T + G(i, j)) / sqrt(d_head).
inline std::vector<Var> attention_logits(Graph& g, const ParamStore& store, const AttentionBlockSpec& b, const Var& x,
                                         const Var& y, const RelationVars* rel) {
  require_width(x, b.dim, b.prefix.c_str());
  require_width(y, b.dim, b.prefix.c_str());
  if (rel && (rel->n() != x.rows() || x.rows() != y.rows())) {
    throw ContractError(b.prefix + ": relation embedding is " + std::to_string(rel->n()) + " points, features " +
                        std::to_string(x.rows()));
  }
  const std::size_t dh = b.dim / b.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = ops::matmul(x, g.param(store, b.name("wq")));
  Var k = ops::matmul(y, g.param(store, b.name("wk")));
  std::vector<Var> out;
  for (std::size_t h = 0; h < b.heads; ++h) {
    Var qh = b.heads == 1 ? q : ops::slice(q, 0, q.rows(), h * dh, dh);
    Var kh = b.heads == 1 ? k : ops::slice(k, 0, k.rows(), h * dh, dh);
    Var e = ops::matmul_nt(qh, kh);
    if (rel) e = ops::add(e, relation_bias(*rel, g.param(store, b.name("wg")), h));
    out.push_back(ops::scale(e, inv));
  }
  return out;
}

/// z_i = sum_j a(i, j) (y_j Wv) with row-softmax weights; `rel` adds the
/// geometric bias (self-attention only).
inline Var attention(Graph& g, const ParamStore& store, const AttentionBlockSpec& b, const Var& x, const Var& y,
                     const RelationVars* rel) {
  const auto logits = attention_logits(g, store, b, x, y, rel);
  Var v = ops::matmul(y, g.param(store, b.name("wv")));
  const std::size_t dh = b.dim / b.heads;
  std::vector<Var> heads;
  for (std::size_t h = 0; h < b.heads; ++h) {
    Var vh = b.heads == 1 ? v : ops::slice(v, 0, v.rows(), h * dh, dh);
    heads.push_back(ops::matmul(ops::softmax_rows(logits[h]), vh));
  }
  return b.heads == 1 ? heads.front() : ops::concat_cols(heads);
}

/// Residual + layer norm around the attention, then a 2-layer feed-forward
/// with its own residual + layer norm.
inline Var attention_block(Graph& g, const ParamStore& store, const AttentionBlockSpec& b, const Var& x, const Var& y,
                           const RelationVars* rel) {
  Var z = attention(g, store, b, x, y, rel);
  Var h = ops::layer_norm_rows(ops::add(x, z), g.param(store, b.prefix + ".ln1.gain"),
                               g.param(store, b.prefix + ".ln1.bias"));
  Var f = diffmath::mlp_forward(g, store, b.ffn, h);
  return ops::layer_norm_rows(ops::add(h, f), g.param(store, b.prefix + ".ln2.gain"),
                              g.param(store, b.prefix + ".ln2.bias"));
}

/// Geometry self-attention (core, without the residual wrapping).
inline Var geometry_self_attention(Graph& g, const ParamStore& store, const AttentionBlockSpec& b, const Var& f,
                                   const RelationVars* rel) {
  return attention(g, store, b, f, f, rel);
}

inline Var feature_cross_attention(Graph& g, const ParamStore& store, const AttentionBlockSpec& b, const Var& fp,
                                   const Var& fq) {
  return attention(g, store, b, fp, fq, nullptr);
}

struct FeaturePair {
  Var p, q;
};

/// n_iter rounds of (self-attention on each cloud, then cross-attention in
/// both directions). Both clouds share the weights, so swapping the inputs
/// swaps the outputs. `geometric` false drops the relation bias.
inline FeaturePair geometry_transformer(Graph& g, const ParamStore& store, const TransformerSpec& t, Var fp, Var fq,
                                        const RelationVars& gp, const RelationVars& gq, bool geometric) {
  if (t.project) {
    fp = diffmath::mlp_forward(g, store, t.in_proj, fp);
    fq = diffmath::mlp_forward(g, store, t.in_proj, fq);
  }
  for (std::size_t k = 0; k < t.self_blocks.size(); ++k) {
    const auto& sb = t.self_blocks[k];
    fp = attention_block(g, store, sb, fp, fp, geometric ? &gp : nullptr);
    fq = attention_block(g, store, sb, fq, fq, geometric ? &gq : nullptr);
    const auto& cb = t.cross_blocks[k];
    Var np = attention_block(g, store, cb, fp, fq, nullptr);
    Var nq = attention_block(g, store, cb, fq, fp, nullptr);
    fp = np;
    fq = nq;
  }
  if (t.project) {
    fp = diffmath::mlp_forward(g, store, t.out_proj, fp);
    fq = diffmath::mlp_forward(g, store, t.out_proj, fq);
  }
  return {fp, fq};
}

}  // namespace utopic::network
