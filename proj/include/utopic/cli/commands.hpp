#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "utopic/cli/run_config.hpp"
#include "utopic/dataset.hpp"
#include "utopic/network.hpp"
#include "utopic/registration.hpp"
#include "utopic/training.hpp"

namespace utopic::cli {

namespace fs = std::filesystem;

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level_from_env() {
  const char* v = std::getenv("UTOPIC_LOG");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "error") return LogLevel::error;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::info;
}

/// Messages go to stderr; a timestamped copy goes to `<out>/run.log`, the
/// only artifact allowed to differ between identical runs.
class Logger {
 public:
  explicit Logger(LogLevel level = log_level_from_env()) : level_(level) {}

  void open_sidecar(const fs::path& path) {
    std::lock_guard lock(mu_);
    sidecar_.open(path, std::ios::app);
  }

  void log(LogLevel at, const std::string& msg) {
    if (at > level_) return;
    std::lock_guard lock(mu_);
    std::cerr << msg << '\n';
    if (sidecar_) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm tm{};
      gmtime_r(&now, &tm);
      sidecar_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << msg << '\n';
      sidecar_.flush();
    }
  }

  void info(const std::string& m) { log(LogLevel::info, m); }
  void debug(const std::string& m) { log(LogLevel::debug, m); }
  void error(const std::string& m) { log(LogLevel::error, m); }

 private:
  LogLevel level_;
  std::mutex mu_;
  std::ofstream sidecar_;
};

/// Flags shared by the subcommands. Unset optionals fall back to the config.
struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  fs::path out;
  fs::path checkpoint;
  fs::path data;         // dataset directory (train, eval)
  fs::path source;       // cloud files (register, inspect)
  fs::path target;
  fs::path predictions;  // eval: score stored transforms instead of a model
};

namespace detail {

inline void make_dir(const fs::path& dir) {
  if (dir.empty()) throw ContractError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

inline RunConfig resolve(const Options& o, Logger& log) {
  RunConfig c = load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  c.train.seed = c.seed;
  make_dir(o.out);
  log.open_sidecar(o.out / "run.log");
  write_json_file(o.out / "config.resolved.json", to_json(c));
  return c;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline dataset::PairSample make_pair(const dataset::GenConfig& gen, std::uint64_t seed, std::size_t index) {
  Rng rng = stream_rng(seed, index);
  return dataset::generate_primitive_pair(dataset::kAllFamilies[index % dataset::kAllFamilies.size()], gen, rng);
}

/// Held-out pairs use a separate seed stream so they never coincide with
/// training pairs.
inline constexpr std::uint64_t kValSalt = 0x76616cULL;
inline constexpr std::uint64_t kSweepSalt = 0x7377656570ULL;

inline std::vector<dataset::PairSample> make_pairs(const dataset::GenConfig& gen, std::uint64_t seed, std::size_t n,
                                                   std::size_t jobs) {
  std::vector<dataset::PairSample> out(n);
  training::parallel_for(n, jobs, [&](std::size_t i) { out[i] = make_pair(gen, seed, i); });
  return out;
}

inline std::vector<dataset::PairSample> load_dataset(const fs::path& root, std::size_t jobs) {
  const auto dirs = dataset::list_samples(root);
  std::vector<dataset::PairSample> out(dirs.size());
  training::parallel_for(dirs.size(), jobs, [&](std::size_t i) { out[i] = dataset::read_sample(dirs[i]); });
  return out;
}

inline network::Model load_model(const Options& o) {
  if (o.checkpoint.empty()) throw ContractError("--checkpoint is required");
  return network::load_checkpoint(o.checkpoint);
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

// Blue (low) to red (high) for a value in [0, 1].
inline std::array<std::uint8_t, 3> heat(double v) {
  v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  return {static_cast<std::uint8_t>(std::lround(255 * v)), 0, static_cast<std::uint8_t>(std::lround(255 * (1 - v)))};
}

}  // namespace detail

/// Synthesizes `samples` pairs into `<out>/sample_NNNNNN/` plus summary.json.
inline int cmd_generate(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  std::vector<double> ratios(c.samples);
  std::vector<std::string> families(c.samples);
  training::parallel_for(c.samples, o.jobs, [&](std::size_t i) {
    const auto s = detail::make_pair(c.generate, c.seed, i);
    dataset::write_sample(o.out / dataset::sample_dir_name(i), s, {c.seed, i, c.generate});
    ratios[i] = dataset::overlap_ratio(s);
    families[i] = s.family;
  });
  Json fam = Json::object();
  double sum = 0.0;
  for (std::size_t i = 0; i < c.samples; ++i) {
    sum += ratios[i];
    fam[families[i]] = fam.value(families[i], 0) + 1;
  }
  Json summary{{"samples", c.samples},
               {"mean_overlap_ratio", c.samples ? Json(sum / static_cast<double>(c.samples)) : Json(nullptr)},
               {"families", fam},
               {"points_per_cloud", c.generate.points_per_cloud},
               {"keep_fraction", c.generate.keep_fraction}};
  write_json_file(o.out / "summary.json", summary);
  log.info("generate: wrote " + std::to_string(c.samples) + " samples to " + o.out.string());
  return 0;
}

/// Trains from `--data` (or pairs synthesized from the config), scoring a
/// held-out set after every epoch. Writes checkpoint_last.bin,
/// checkpoint_best.bin (lowest held-out Error(R)), train_log.csv and
/// val_log.csv.
inline int cmd_train(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  const auto train_data = o.data.empty() ? detail::make_pairs(c.generate, c.seed, c.samples, o.jobs)
                                         : detail::load_dataset(o.data, o.jobs);
  if (train_data.empty()) throw ContractError("train: dataset is empty");
  const auto val_data = detail::make_pairs(c.generate, c.seed ^ detail::kValSalt, c.val_samples, o.jobs);

  network::Model model(c.model, c.seed);
  training::Optimizer opt(c.train);
  std::ofstream train_log(o.out / "train_log.csv");
  std::ofstream val_log(o.out / "val_log.csv");
  if (!train_log || !val_log) throw IoError("cannot write logs in " + o.out.string());
  train_log << training::kTrainLogHeader << '\n';
  val_log << "epoch," << training::kMetricColumns << ",failures\n";

  auto score = [&](const std::string& tag) {
    if (val_data.empty()) return 0.0;
    const auto r = training::eval_metrics(training::evaluate(model, val_data, c.seed, o.jobs));
    val_log << tag << ',' << training::fmt(r.rmse_r) << ',' << training::fmt(r.mae_r) << ','
            << training::fmt(r.rmse_t) << ',' << training::fmt(r.mae_t) << ',' << training::fmt(r.err_r) << ','
            << training::fmt(r.err_t) << ',' << training::fmt(r.oa) << ',' << r.failures << '\n';
    log.info("epoch " + tag + ": held-out err_r " + training::fmt(r.err_r) + " err_t " + training::fmt(r.err_t) +
             " failures " + std::to_string(r.failures));
    return r.err_r;
  };

  double best = score("init");
  network::save_checkpoint(o.out / "checkpoint_best.bin", model);
  for (std::size_t e = 0; e < c.train.epochs; ++e) {
    const auto stats = training::train_epoch(model, train_data, c.train, e, opt, o.jobs);
    for (const auto& s : stats.log) train_log << training::train_log_row(s) << '\n';
    train_log.flush();
    log.debug("epoch " + std::to_string(e) + " mean loss " + training::fmt(stats.mean.total));
    const double err = score(std::to_string(e));
    if (val_data.empty() || err < best) {
      best = err;
      network::save_checkpoint(o.out / "checkpoint_best.bin", model);
    }
  }
  network::save_checkpoint(o.out / "checkpoint_last.bin", model);
  log.info("train: done, best held-out err_r " + training::fmt(best));
  return 0;
}

/// Registers --source onto --target; writes result.json.
inline int cmd_register(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  const auto model = detail::load_model(o);
  const auto p = geom3d::load_point_cloud(o.source);
  const auto q = geom3d::load_point_cloud(o.target);
  Rng rng = stream_rng(c.seed, 0, training::kEvalSalt);
  const auto r = registration::register_pair(p, q, model, registration::Mode::infer, rng);
  write_json_file(o.out / "result.json", registration::to_json(r));
  if (r.diagnostics.failed) log.info("register: soft failure: " + r.diagnostics.failure);
  return 0;
}

/// Scores a dataset. With --checkpoint the model predicts (and predictions
/// are written to predictions.json); with --predictions the stored
/// transforms and scores are scored as-is.
inline int cmd_eval(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  if (o.data.empty()) throw ContractError("--data is required");
  const auto dirs = dataset::list_samples(o.data);
  const auto data = detail::load_dataset(o.data, o.jobs);
  std::vector<training::PairOutcome> outcomes;
  if (!o.predictions.empty()) {
    const Json pj = read_json_file(o.predictions);
    const auto& pairs = pj.at("pairs");
    if (pairs.size() != data.size()) throw IoError(o.predictions.string() + ": pair count does not match dataset");
    for (std::size_t i = 0; i < data.size(); ++i) {
      training::PairOutcome oc;
      oc.pred = dataset::transform_from_json(pairs[i]);
      oc.gt = data[i].gt_transform;
      oc.failed = pairs[i].value("failed", false);
      oc.scores = pairs[i].at("overlap_source").get<std::vector<double>>();
      const auto sq = pairs[i].at("overlap_target").get<std::vector<double>>();
      oc.scores.insert(oc.scores.end(), sq.begin(), sq.end());
      oc.labels = data[i].gt_overlap_source;
      oc.labels.insert(oc.labels.end(), data[i].gt_overlap_target.begin(), data[i].gt_overlap_target.end());
      if (oc.scores.size() != oc.labels.size())
        throw IoError(o.predictions.string() + ": overlap score count mismatch on pair " + std::to_string(i));
      outcomes.push_back(std::move(oc));
    }
  } else {
    const auto model = detail::load_model(o);
    std::vector<registration::RegistrationResult> results;
    outcomes = training::evaluate(model, data, c.seed, o.jobs, &results);
    Json pairs = Json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      Json pj = dataset::transform_to_json(results[i].transform);
      pj["sample"] = dirs[i].filename().string();
      pj["failed"] = results[i].diagnostics.failed;
      pj["overlap_source"] = results[i].overlap_p;
      pj["overlap_target"] = results[i].overlap_q;
      pairs.push_back(std::move(pj));
    }
    write_json_file(o.out / "predictions.json", Json{{"pairs", pairs}});
  }
  const auto report = training::eval_metrics(outcomes);
  detail::write_text(o.out / "metrics.csv", training::metrics_csv(report));
  write_json_file(o.out / "metrics.json", training::to_json(report));
  log.info("eval: err_r " + training::fmt(report.err_r) + " err_t " + training::fmt(report.err_t) + " failures " +
           std::to_string(report.failures));
  return 0;
}

/// One row per keep fraction: crop, register and score `sweep_pairs` fresh
/// pairs. Without --checkpoint only the overlap columns are filled.
inline int cmd_sweep(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  std::optional<network::Model> model;
  if (!o.checkpoint.empty()) model = detail::load_model(o);
  std::string csv = "bucket,keep_fraction,mean_overlap_ratio," + std::string(training::kMetricColumns) + ",failures\n";
  for (std::size_t b = 0; b < c.sweep_keep.size(); ++b) {
    dataset::GenConfig gen = c.generate;
    gen.keep_fraction = c.sweep_keep[b];
    gen.validate();
    const auto data = detail::make_pairs(gen, stream_rng(c.seed, b, detail::kSweepSalt)(), c.sweep_pairs, o.jobs);
    double ratio = 0.0;
    for (const auto& s : data) ratio += dataset::overlap_ratio(s);
    ratio /= static_cast<double>(data.size());
    std::vector<std::string> row{std::to_string(b), training::fmt(gen.keep_fraction), training::fmt(ratio)};
    if (model) {
      const auto r = training::eval_metrics(training::evaluate(*model, data, c.seed, o.jobs));
      for (double v : {r.rmse_r, r.mae_r, r.rmse_t, r.mae_t, r.err_r, r.err_t, r.oa}) row.push_back(training::fmt(v));
      row.push_back(std::to_string(r.failures));
    } else {
      row.insert(row.end(), 8, "");
    }
    csv += detail::csv_row(row);
    log.info("sweep: bucket " + std::to_string(b) + " keep " + training::fmt(gen.keep_fraction) + " overlap " +
             training::fmt(ratio));
  }
  detail::write_text(o.out / "sweep.csv", csv);
  return 0;
}

/// Per-point overlap and uncertainty of one registration as CSV, plus PLYs
/// coloured by each quantity (blue low, red high).
inline int cmd_inspect(const Options& o, Logger& log) {
  const RunConfig c = detail::resolve(o, log);
  const auto model = detail::load_model(o);
  const auto p = geom3d::load_point_cloud(o.source);
  const auto q = geom3d::load_point_cloud(o.target);
  Rng rng = stream_rng(c.seed, 0, training::kEvalSalt);
  const auto r = registration::register_pair(p, q, model, registration::Mode::infer, rng);
  std::string csv = "cloud,index,x,y,z,overlap,uncertainty\n";
  auto emit = [&](const char* name, const geom3d::PointCloud& pc, const std::vector<double>& ov,
                  const std::vector<double>& un) {
    std::vector<std::array<std::uint8_t, 3>> c_ov, c_un;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      csv += detail::csv_row({name, std::to_string(i), training::fmt(pc[i].x()), training::fmt(pc[i].y()),
                              training::fmt(pc[i].z()), training::fmt(ov[i]), training::fmt(un[i])});
      c_ov.push_back(detail::heat(ov[i]));
      c_un.push_back(detail::heat(un[i]));
    }
    geom3d::write_ply(o.out / (std::string(name) + "_overlap.ply"), pc, &c_ov);
    geom3d::write_ply(o.out / (std::string(name) + "_uncertainty.ply"), pc, &c_un);
  };
  emit("source", p, r.overlap_p, r.uncertainty_p);
  emit("target", q, r.overlap_q, r.uncertainty_q);
  detail::write_text(o.out / "points.csv", csv);
  log.info("inspect: wrote points.csv and coloured PLYs to " + o.out.string());
  return 0;
}

}  // namespace utopic::cli
