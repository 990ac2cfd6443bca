#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "utopic/dataset/pair.hpp"
#include "utopic/json_util.hpp"
#include "utopic/network/model.hpp"
#include "utopic/registration/pipeline.hpp"
#include "utopic/rng.hpp"
#include "utopic/training/losses.hpp"
#include "utopic/training/metrics.hpp"

namespace utopic::training {

using dataset::PairSample;
using diffmath::Gradients;
using diffmath::ParamStore;
using network::Model;

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 1;
  double learning_rate = 0.001;
  double lambda = 0.5;
  double eta = 0.1;
  Reduction registration_reduction = Reduction::sum;
  std::string optimizer = "sgd";  // "sgd" or "adam"
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ContractError("train: learning_rate must be >= 0");
    if (lambda < 0.0 || eta < 0.0) throw ContractError("train: lambda and eta must be >= 0");
    if (batch_size < 1) throw ContractError("train: batch_size must be >= 1");
    if (optimizer != "sgd" && optimizer != "adam") throw ContractError("train: optimizer must be 'sgd' or 'adam'");
  }
};

inline Json to_json(const TrainConfig& c) {
  return Json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"lambda", c.lambda},
              {"eta", c.eta},
              {"registration_reduction", c.registration_reduction == Reduction::sum ? "sum" : "mean"},
              {"optimizer", c.optimizer}};
}

inline TrainConfig train_config_from_json(const Json& j, TrainConfig c = {}) {
  require_known_keys(j, {"epochs", "batch_size", "learning_rate", "lambda", "eta", "registration_reduction", "optimizer"},
                     "train");
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "lambda", c.lambda);
  read_opt(j, "eta", c.eta);
  read_opt(j, "optimizer", c.optimizer);
  if (j.contains("registration_reduction")) {
    const auto s = j.at("registration_reduction").get<std::string>();
    if (s == "sum") c.registration_reduction = Reduction::sum;
    else if (s == "mean") c.registration_reduction = Reduction::mean;
    else throw ContractError("train: registration_reduction must be 'sum' or 'mean'");
  }
  c.validate();
  return c;
}

struct LossTerms {
  double r = 0.0, o = 0.0, u = 0.0, c = 0.0, total = 0.0;

  LossTerms& operator+=(const LossTerms& x) {
    r += x.r;
    o += x.o;
    u += x.u;
    c += x.c;
    total += x.total;
    return *this;
  }
  LossTerms scaled(double s) const { return {r * s, o * s, u * s, c * s, total * s}; }
};

/// Completion target in the network's centred input frame.
inline Tensor centred_completion_target(const geom3d::PointCloud& complete, const geom3d::PointCloud& partial) {
  Tensor t = complete.to_tensor();
  const auto c = partial.centroid();
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t k = 0; k < 3; ++k) t(i, k) -= c[static_cast<int>(k)];
  return t;
}

struct SampleResult {
  LossTerms terms;
  Gradients grads;
};

namespace detail {

inline void require_finite_term(double v, const char* term, std::size_t index) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("loss term ") + term + " is not finite on sample " + std::to_string(index));
  }
}

}  // namespace detail

/// Forward in training mode, L = L_r + L_o + L_u + L_c, and the gradient of
/// L with respect to every parameter.
template <class R>
SampleResult sample_gradients(const Model& model, const PairSample& s, const TrainConfig& cfg, R& rng,
                              std::size_t index = 0) {
  diffmath::Graph g;
  SampleResult out;
  // Names the loss term under construction when a forward op trips.
  const char* stage = "forward";
  try {
    const auto fw = network::forward_pair(g, model, s.source, s.target, rng, true);
    stage = "L_r";
    Var lr = registration_loss(fw.soft_final, s.gt_correspondence, cfg.registration_reduction);
    stage = "L_o";
    Var lo = diffmath::add(overlap_loss(fw.overlap_p, s.gt_overlap_source), overlap_loss(fw.overlap_q, s.gt_overlap_target));
    stage = "L_u";
    Var lu = diffmath::add(uncertainty_loss(g, fw.dist_p, s.gt_overlap_source, cfg.lambda, cfg.eta, rng),
                           uncertainty_loss(g, fw.dist_q, s.gt_overlap_target, cfg.lambda, cfg.eta, rng));
    stage = "L_c";
    Var lc = diffmath::add(
        chamfer_loss(network::coarse_completion(g, model.params, model.layout, fw.feat_p),
                     centred_completion_target(s.complete_source, s.source)),
        chamfer_loss(network::coarse_completion(g, model.params, model.layout, fw.feat_q),
                     centred_completion_target(s.complete_target, s.target)));
    out.terms = {lr.value().item(), lo.value().item(), lu.value().item(), lc.value().item(), 0.0};
    detail::require_finite_term(out.terms.r, "L_r", index);
    detail::require_finite_term(out.terms.o, "L_o", index);
    detail::require_finite_term(out.terms.u, "L_u", index);
    detail::require_finite_term(out.terms.c, "L_c", index);
    stage = "backward";
    Var total = diffmath::add(diffmath::add(lr, lo), diffmath::add(lu, lc));
    out.terms.total = total.value().item();
    g.backward(total);
  } catch (const ContractError& e) {
    throw NumericalError(std::string(stage) + " on sample " + std::to_string(index) + ": " + e.what());
  }
  out.grads = g.gradients(model.params);
  for (const auto& [name, t] : out.grads)
    if (!t.all_finite()) throw NumericalError("gradient of " + name + " is not finite on sample " + std::to_string(index));
  return out;
}

/// p -= lr * grad for every parameter.
inline void sgd_step(ParamStore& params, const Gradients& grads, double lr) {
  for (auto& [name, t] : params.tensors()) {
    const Tensor& gt = grads.at(name);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] -= lr * gt[k];
  }
}

/// Plain SGD, or Adam (beta1 0.9, beta2 0.999, eps 1e-8) when configured.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : adam_(cfg.optimizer == "adam"), lr_(cfg.learning_rate) {}

  void step(ParamStore& params, const Gradients& grads) {
    if (!adam_) {
      sgd_step(params, grads, lr_);
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (auto& [name, p] : params.tensors()) {
      const Tensor& g = grads.at(name);
      Tensor& m = m_.try_emplace(name, Tensor(p.shape(), std::vector<double>(p.size(), 0.0))).first->second;
      Tensor& v = v_.try_emplace(name, Tensor(p.shape(), std::vector<double>(p.size(), 0.0))).first->second;
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
        p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  bool adam_;
  double lr_;
  std::size_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

struct StepLog {
  std::size_t epoch = 0, step = 0;
  LossTerms terms;  // batch means
};

struct EpochStats {
  LossTerms mean;
  std::size_t steps = 0;
  std::vector<StepLog> log;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline constexpr std::uint64_t kTrainSalt = 0x747261696eULL;
inline constexpr std::uint64_t kEvalSalt = 0x6576616cULL;

/// One pass over `data` in a seed-determined order. Batch members are
/// independent RNG streams keyed by (seed, epoch, sample index), so results
/// do not depend on `jobs`. Throws NumericalError on a non-finite loss.
inline EpochStats train_epoch(Model& model, const std::vector<PairSample>& data, const TrainConfig& cfg,
                              std::size_t epoch, Optimizer& opt, std::size_t jobs = 1) {
  cfg.validate();
  if (data.empty()) throw ContractError("train_epoch: empty dataset");
  Rng order_rng = stream_rng(cfg.seed, epoch, kTrainSalt ^ 1);
  const auto order = dataset::detail::random_order(data.size(), order_rng);
  EpochStats stats;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, order.size() - start);
    std::vector<SampleResult> results(count);
    parallel_for(count, jobs, [&](std::size_t b) {
      const std::size_t idx = order[start + b];
      Rng rng = stream_rng(cfg.seed, epoch * 1000003ULL + idx, kTrainSalt);
      results[b] = sample_gradients(model, data[idx], cfg, rng, idx);
    });
    LossTerms batch;
    Gradients sum = std::move(results[0].grads);
    batch += results[0].terms;
    for (std::size_t b = 1; b < count; ++b) {
      batch += results[b].terms;
      for (auto& [name, t] : sum) t += results[b].grads.at(name);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& [name, t] : sum)
      for (auto& v : t.values()) v *= inv;
    opt.step(model.params, sum);
    batch = batch.scaled(inv);
    stats.log.push_back({epoch, stats.steps, batch});
    stats.mean += batch;
    ++stats.steps;
  }
  stats.mean = stats.mean.scaled(1.0 / static_cast<double>(stats.steps));
  return stats;
}

/// Single-epoch convenience overload with a fresh optimizer.
inline EpochStats train_epoch(Model& model, const std::vector<PairSample>& data, const TrainConfig& cfg,
                              std::size_t epoch = 0, std::size_t jobs = 1) {
  Optimizer opt(cfg);
  return train_epoch(model, data, cfg, epoch, opt, jobs);
}

inline constexpr const char* kTrainLogHeader = "epoch,step,L_r,L_o,L_u,L_c,total";

inline std::string train_log_row(const StepLog& s) {
  return std::to_string(s.epoch) + "," + std::to_string(s.step) + "," + fmt(s.terms.r) + "," + fmt(s.terms.o) + "," +
         fmt(s.terms.u) + "," + fmt(s.terms.c) + "," + fmt(s.terms.total);
}

/// Registers every pair in inference mode and collects metric inputs.
inline std::vector<PairOutcome> evaluate(const Model& model, const std::vector<PairSample>& data, std::uint64_t seed,
                                         std::size_t jobs = 1,
                                         std::vector<registration::RegistrationResult>* results = nullptr) {
  std::vector<PairOutcome> out(data.size());
  if (results) results->assign(data.size(), {});
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    Rng rng = stream_rng(seed, i, kEvalSalt);
    const auto& s = data[i];
    auto r = registration::register_pair(s.source, s.target, model, registration::Mode::infer, rng);
    PairOutcome& o = out[i];
    o.pred = r.transform;
    o.gt = s.gt_transform;
    o.failed = r.diagnostics.failed;
    o.scores = r.overlap_p;
    o.scores.insert(o.scores.end(), r.overlap_q.begin(), r.overlap_q.end());
    o.labels = s.gt_overlap_source;
    o.labels.insert(o.labels.end(), s.gt_overlap_target.begin(), s.gt_overlap_target.end());
    if (results) (*results)[i] = std::move(r);
  });
  return out;
}

}  // namespace utopic::training
