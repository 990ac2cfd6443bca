#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "utopic/diffmath.hpp"
#include "utopic/network/attention.hpp"

using namespace utopic;
using namespace utopic::diffmath;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

// Naive triple loop, independent of the Eigen-backed op.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

double leaky(double x) { return x > 0 ? x : 0.01 * x; }

}  // namespace

TEST(Tensor, RejectsMismatchedShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Graph g;
  Var i2 = g.constant(Tensor::identity(2));
  Var b = g.constant(Tensor::from_rows({{5, 6}, {7, 8}}));
  EXPECT_EQ(matmul(i2, b).value(), b.value());
}

TEST(Matmul, MatchesNaiveOracle) {
  Graph g;
  Var a = g.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  Var b = g.constant(Tensor::from_rows({{5, 6}, {7, 8}}));
  const Tensor got = matmul(a, b).value();
  EXPECT_EQ(got, naive_matmul(a.value(), b.value()));
  EXPECT_EQ(got, Tensor::from_rows({{19, 22}, {43, 50}}));

  std::mt19937_64 rng(3);
  Var x = g.constant(random_tensor(7, 5, rng));
  Var y = g.constant(random_tensor(5, 4, rng));
  EXPECT_LT(max_abs_diff(matmul(x, y).value(), naive_matmul(x.value(), y.value())), 1e-14);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Graph g;
  Var a = g.constant(Tensor(2, 3));
  Var b = g.constant(Tensor(4, 2));
  EXPECT_THROW(matmul(a, b), DimensionError);
}

TEST(SoftmaxRows, SymmetricRowIsUniform) {
  Graph g;
  const Tensor y = softmax_rows(g.constant(Tensor::from_rows({{0, 0}}))).value();
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.5);
}

TEST(SoftmaxRows, SaturatesWithoutNaN) {
  Graph g;
  const Tensor y = softmax_rows(g.constant(Tensor::from_rows({{1000, 0}}))).value();
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 0.0, 1e-15);
}

TEST(SoftmaxRows, MatchesDirectExponentiation) {
  Graph g;
  const Tensor y = softmax_rows(g.constant(Tensor::from_rows({{std::log(3.0), std::log(1.0)}}))).value();
  // exp(ln 3) / (exp(ln 3) + exp(0))
  EXPECT_NEAR(y(0, 0), 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(y(0, 1), 1.0 / 4.0, 1e-15);
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  ParamStore store;
  MlpSpec spec{"m", {{3, 3, Activation::none}}};
  store.set(spec.weight_name(0), Tensor::identity(3));
  store.set(spec.bias_name(0), Tensor(1, 3));
  const Tensor x = Tensor::from_rows({{1, -2, 3}, {0.5, 0, -7}});
  EXPECT_EQ(mlp_forward(store, spec, x), x);
}

TEST(Mlp, ZeroWeightsGiveActivatedBias) {
  ParamStore store;
  MlpSpec spec{"m", {{2, 3, Activation::leaky_relu}}};
  store.set(spec.weight_name(0), Tensor(2, 3));
  store.set(spec.bias_name(0), Tensor::from_rows({{1.0, -2.0, 0.5}}));
  const Tensor y = mlp_forward(store, spec, Tensor::from_rows({{3, 4}, {-1, 9}, {0, 0}}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(y(i, 0), 1.0);
    EXPECT_DOUBLE_EQ(y(i, 1), leaky(-2.0));
    EXPECT_DOUBLE_EQ(y(i, 2), 0.5);
  }
}

TEST(Mlp, TwoLayerMatchesHandComposition) {
  std::mt19937_64 rng(11);
  ParamStore store;
  auto spec = MlpSpec::chain("m", {4, 5, 2});
  init_mlp(store, spec, rng);
  const Tensor x = random_tensor(3, 4, rng);
  const Tensor y = mlp_forward(store, spec, x);

  const Tensor& w0 = store.at(spec.weight_name(0));
  const Tensor& b0 = store.at(spec.bias_name(0));
  const Tensor& w1 = store.at(spec.weight_name(1));
  const Tensor& b1 = store.at(spec.bias_name(1));
  Tensor h = naive_matmul(x, w0);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = leaky(h(i, j) + b0(0, j));
  Tensor expect = naive_matmul(h, w1);
  for (std::size_t i = 0; i < expect.rows(); ++i)
    for (std::size_t j = 0; j < expect.cols(); ++j) expect(i, j) += b1(0, j);
  EXPECT_LT(max_abs_diff(y, expect), 1e-14);
}

TEST(Mlp, WidthMismatchThrows) {
  std::mt19937_64 rng(1);
  ParamStore store;
  auto spec = MlpSpec::chain("m", {4, 2});
  init_mlp(store, spec, rng);
  EXPECT_THROW(mlp_forward(store, spec, Tensor(2, 3)), DimensionError);
}

TEST(Backward, SumGivesAllOnes) {
  Graph g;
  std::mt19937_64 rng(5);
  Var x = g.leaf(random_tensor(3, 4, rng));
  g.backward(sum(x));
  const Tensor gx = g.grad(x);
  for (double v : gx.values()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Backward, SigmoidAtZero) {
  Graph g;
  Var x = g.leaf(Tensor::scalar(0.0));
  g.backward(sigmoid(x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 0.25);
}

TEST(Backward, NonScalarLossThrows) {
  Graph g;
  Var x = g.leaf(Tensor(2, 2, 1.0));
  EXPECT_THROW(g.backward(x), ContractError);
}

TEST(Backward, FanOutAccumulates) {
  Graph g;
  Var x = g.leaf(Tensor::scalar(3.0));
  // x*x + x -> 2x + 1 = 7
  g.backward(add(mul(x, x), x));
  EXPECT_DOUBLE_EQ(g.grad(x).item(), 7.0);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  ParamStore store;
  store.set("used", Tensor(1, 2, 1.0));
  store.set("unused", Tensor(2, 2, 1.0));
  Graph g;
  g.backward(sum(square(g.param(store, "used"))));
  const auto grads = g.gradients(store);
  for (double v : grads.at("unused").values()) EXPECT_EQ(v, 0.0);
  for (double v : grads.at("used").values()) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(Backward, RandomCompositeMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const Tensor w = random_tensor(4, 3, rng);
  const Tensor gain = random_tensor(1, 3, rng, 0.5, 1.5);
  const Tensor x0 = random_tensor(5, 4, rng);
  auto fn = [&](Graph& g, Var x) {
    Var h = matmul(x, g.constant(w));
    h = layer_norm_rows(h, g.constant(gain), g.constant(Tensor(1, 3)));
    h = softmax_rows(add(leaky_relu(h), square(sigmoid(h))));
    Var v = row_variance(concat_cols({h, softplus(h)}));
    return add(sum(minmax_normalize(v)), mean(log(add_scalar(exp(h), 1.0))));
  };
  EXPECT_LT(grad_check(fn, x0, 1e-5), 1e-4);
}

TEST(GradCheck, SquareAtThree) {
  auto fn = [](Graph&, Var x) { return sum(square(x)); };
  EXPECT_LT(grad_check(fn, Tensor::scalar(3.0), 1e-5), 1e-8);
}

TEST(GradCheck, SoftmaxSumIsConstant) {
  std::mt19937_64 rng(4);
  const Tensor x0 = random_tensor(3, 5, rng);
  Graph g;
  Var x = g.leaf(x0);
  Var s = scale(sum(softmax_rows(x)), 1.0 / 3.0);
  g.backward(s);
  const Tensor gx = g.grad(x);
  for (double v : gx.values()) EXPECT_NEAR(v, 0.0, 1e-10);
  auto fn = [](Graph&, Var x) { return sum(softmax_rows(x)); };
  EXPECT_LT(grad_check(fn, x0), 1e-8);
}

TEST(GradCheck, GeometrySelfAttentionBlock) {
  network::ModelConfig cfg;
  cfg.feature_dim = cfg.transformer_dim = 8;
  cfg.n_iter = 1;
  cfg.extractor_channels = {4};
  cfg.extractor_hidden = 4;
  cfg.k_local = 2;
  const network::ModelLayout layout(cfg);
  const ParamStore store = network::init_model(layout, 9);
  const auto& block = layout.tf1.self_blocks.front();

  std::mt19937_64 rng(8);
  geom3d::PointCloud pc;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 4; ++i) pc.points.emplace_back(u(rng), u(rng), u(rng));
  const auto emb = embedding::relation_embedding(pc);
  const Tensor f0 = random_tensor(4, 8, rng);
  const Tensor mix = random_tensor(4, 8, rng);

  auto fn = [&](Graph& g, Var f) {
    const auto rel = network::RelationVars::record(g, emb);
    Var z = network::attention_block(g, store, block, f, f, &rel);
    return sum(mul(z, g.constant(mix)));
  };
  EXPECT_LT(grad_check(fn, f0, 1e-5), 1e-4);
}

TEST(Graph, NonFiniteForwardValueIsRejected) {
  Graph g;
  Var x = g.leaf(Tensor::scalar(1000.0));
  EXPECT_THROW(exp(x), ContractError);
}
