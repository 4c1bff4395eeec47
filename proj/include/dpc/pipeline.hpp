#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpc/checkpoint.hpp"
#include "dpc/config.hpp"
#include "dpc/experiment.hpp"
#include "dpc/io.hpp"
#include "dpc/log.hpp"
#include "dpc/train.hpp"

namespace dpc {

inline constexpr const char* kVersion = "1.0.0";

namespace fs = std::filesystem;

/// File names inside a run directory.
struct RunPaths {
  fs::path dir;
  fs::path config() const { return dir / "config.json"; }
  fs::path manifest() const { return dir / "manifest.json"; }
  fs::path dataset() const { return dir / "dataset.bin"; }
  fs::path dataset_csv() const { return dir / "dataset.csv"; }
  fs::path checkpoint(const std::string& method) const { return dir / ("checkpoint_" + method + ".bin"); }
  fs::path train_log(const std::string& method) const { return dir / ("train_log_" + method + ".csv"); }
  fs::path table1() const { return dir / "table1.csv"; }
  fs::path hellinger() const { return dir / "hellinger.csv"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path convergence() const { return dir / "convergence.csv"; }
};

inline EvalSettings eval_settings(const RunConfig& c) {
  EvalSettings e;
  e.n_times = c.eval.n_times;
  e.horizon_factor = c.eval.horizon_factor;
  e.n_test_points = c.eval.n_test_points;
  e.mc_paths = c.eval.mc_paths;
  e.model_paths = c.eval.model_paths;
  e.grid_points = c.eval.grid_points;
  e.seed = c.eval.seed;
  return e;
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.epochs = c.train.epochs;
  t.batch_size = c.train.batch_size;
  t.lr = {c.train.lr, c.train.lr_factor, c.train.lr_period};
  t.seed = c.train.seed;
  t.plateau_window = c.train.plateau_window;
  t.plateau_tol = c.train.plateau_tol;
  t.learn_hyperparameters = c.train.learn_hyperparameters;
  t.checkpoint_every = c.train.checkpoint_every;
  return t;
}

inline DpcOptions dpc_options(const RunConfig& c, bool data_only) {
  DpcOptions o;
  o.hidden = c.train.hidden;
  o.init_seed = stream_key(c.train.seed, {static_cast<std::uint64_t>(StreamTag::kInit), data_only ? 1u : 0u});
  o.lambda = c.train.lambda;
  o.beta_in = c.train.beta_in;
  o.beta_out = c.train.beta_out;
  o.data_only = data_only;
  o.zero_heads = c.train.zero_heads;
  return o;
}

/// The first n parameter realizations of a dataset.
inline TrajectoryDataset dataset_head(const TrajectoryDataset& d, std::size_t n) {
  if (n < 1 || n > d.n_samples)
    throw ContractError("dataset_head: requested " + std::to_string(n) + " of " +
                        std::to_string(d.n_samples) + " samples");
  TrajectoryDataset out(n, d.n_replications, d.n_steps, d.dim_state, d.dim_params);
  out.label = d.label;
  out.seed = d.seed;
  out.dt = d.dt;
  out.params = d.params.topRows(static_cast<Eigen::Index>(n));
  std::copy_n(d.trajectories.begin(), out.trajectories.size(), out.trajectories.begin());
  return out;
}

namespace detail {

inline void update_manifest(const RunPaths& p, const RunConfig& c, const std::vector<fs::path>& written) {
  nlohmann::json m;
  if (fs::exists(p.manifest())) {
    std::ifstream is(p.manifest());
    try {
      m = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception&) {
      m = nlohmann::json::object();
    }
  }
  m["version"] = kVersion;
  m["format_version"] = kFormatVersion;
  m["config"] = to_json(c);
  m["config_hash"] = config_hash(c);
  m["seeds"] = {{"data", c.data.seed}, {"train", c.train.seed}, {"eval", c.eval.seed}};
  for (const fs::path& f : written) m["files"][f.filename().string()] = file_hash(f);
  std::ofstream os = open_out(p.manifest());
  os << m.dump(2) << '\n';
}

inline std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", t);
  return buf;
}

inline void write_train_log(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream os = open_out(path);
  os.precision(10);
  os << "epoch,lr,loss,lambda,beta_in,beta_out,wall_seconds,skipped_batches\n";
  for (const EpochRecord& r : history)
    os << r.epoch << ',' << r.lr << ',' << r.loss << ',' << r.lambda << ',' << r.beta_in << ','
       << r.beta_out << ',' << r.wall_seconds << ',' << r.skipped_batches << '\n';
}

}  // namespace detail

/// Simulates the training data and writes dataset.bin, config.json and the manifest.
inline TrajectoryDataset cmd_generate(const RunConfig& c, bool csv = false) {
  validate(c);
  const RunPaths p{c.output_dir};
  const BenchmarkSpec spec = c.spec();
  log_info("generating " + std::to_string(c.data.n_samples) + " x " + std::to_string(c.data.n_replications) +
           " trajectories for " + spec.name);
  TrajectoryDataset d = simulate_ensemble(spec.true_model, spec.sim_config(c.data.seed), spec.param_sampler(),
                                          c.data.n_samples, c.data.n_replications);
  write_dataset(p.dataset(), d);
  save_config(p.config(), c);
  std::vector<fs::path> written = {p.dataset(), p.config()};
  if (csv) {
    write_dataset_csv(p.dataset_csv(), d);
    written.push_back(p.dataset_csv());
  }
  detail::update_manifest(p, c, written);
  return d;
}

inline void check_dataset_matches(const TrajectoryDataset& d, const RunConfig& c) {
  if (d.label != c.benchmark)
    throw ConfigError("dataset was generated for benchmark '" + d.label + "', config names '" +
                      c.benchmark + "'");
  if (d.n_steps != c.data.n_steps || d.dt != c.data.dt)
    throw ConfigError("dataset time grid does not match the config's data block");
  if (d.n_samples < 2) throw ConfigError("dataset needs at least two parameter realizations");
}

using EpochCallback = std::function<void(const std::string& method, const EpochRecord&)>;

/// Trains one corrector (dpc or data_only) on `data`, checkpointing as it goes. With `resume`,
/// continues from an existing checkpoint of the same benchmark and regime.
inline TrainState train_method(const RunConfig& c, const TrajectoryDataset& data, bool data_only, bool resume,
                               const EpochCallback& cb = {}) {
  const RunPaths p{c.output_dir};
  const std::string method = data_only ? "data_only" : "dpc";
  const BenchmarkSpec spec = c.spec();
  check_dataset_matches(data, c);
  Checkpoint ck;
  ck.benchmark = benchmark_to_json(spec);
  ck.train_seed = c.train.seed;
  ck.extra = {{"config_hash", config_hash(c)}, {"method", method}};
  if (resume && fs::exists(p.checkpoint(method))) {
    Checkpoint old = load_checkpoint(p.checkpoint(method));
    if (old.state.model.benchmark != c.benchmark || old.state.model.regime != regime_name(c.regime))
      throw ConfigError("checkpoint is for " + old.state.model.benchmark + "/" + old.state.model.regime +
                        ", config names " + c.benchmark + "/" + regime_name(c.regime));
    ck.state = std::move(old.state);
    log_info("resuming " + method + " at epoch " + std::to_string(ck.state.epoch));
  } else {
    ck.state = start_training(make_dpc_model(spec, c.regime, data, dpc_options(c, data_only)));
  }
  const TrainConfig tc = train_config(c);
  train(ck.state, data, tc, [&](const TrainState& st, const EpochRecord& r) {
    if (cb) cb(method, r);
    if (tc.checkpoint_every > 0 && st.epoch % tc.checkpoint_every == 0) {
      Checkpoint snap{ck.benchmark, ck.train_seed, st, ck.extra};
      save_checkpoint(p.checkpoint(method), snap);
      detail::write_train_log(p.train_log(method), st.history);
    }
    return true;
  });
  save_checkpoint(p.checkpoint(method), ck);
  detail::write_train_log(p.train_log(method), ck.state.history);
  detail::update_manifest(p, c, {p.checkpoint(method), p.train_log(method)});
  return ck.state;
}

inline void cmd_train(const RunConfig& c, bool resume = false, const EpochCallback& cb = {}) {
  validate(c);
  const RunPaths p{c.output_dir};
  if (!fs::exists(p.dataset()))
    throw IoError("no dataset at '" + p.dataset().string() + "'; run generate first");
  const TrajectoryDataset data = read_dataset(p.dataset());
  train_method(c, data, false, resume, cb);
  train_method(c, data, true, resume, cb);
}

inline void write_evaluation(const RunPaths& p, const RunConfig& c, const EvaluationResult& r) {
  const std::string col = c.benchmark + "_" + regime_name(c.regime);
  {
    std::ofstream os = detail::open_out(p.table1());
    os.precision(10);
    os << "method," << col << "_epsilon," << col << "_epsilon_sum\n";
    for (const MethodReport& m : r.reports) os << m.method << ',' << m.epsilon << ',' << m.epsilon_sum << '\n';
  }
  {
    std::ofstream os = detail::open_out(p.hellinger());
    os.precision(10);
    os << "time";
    for (const MethodReport& m : r.reports) os << ',' << m.method;
    os << '\n';
    for (std::size_t t = 0; t < r.times.size(); ++t) {
      os << r.times[t];
      for (const MethodReport& m : r.reports) os << ',' << m.hellinger[t];
      os << '\n';
    }
  }
  for (const PdfTable& t : r.pdfs) {
    std::ofstream os = detail::open_out(p.dir / ("pdf_" + col + "_" + detail::time_tag(t.time) + ".csv"));
    os.precision(10);
    os << "grid";
    for (const auto& name : t.columns) os << ',' << name;
    os << '\n';
    for (std::size_t g = 0; g < t.grid.size(); ++g) {
      os << t.grid[g];
      for (const auto& d : t.densities) os << ',' << d[g];
      os << '\n';
    }
  }
  nlohmann::json j;
  j["benchmark"] = c.benchmark;
  j["regime"] = regime_name(c.regime);
  j["times"] = r.times;
  j["test_points"] = nlohmann::json::array();
  for (Eigen::Index k = 0; k < r.test_points.rows(); ++k)
    j["test_points"].push_back(std::vector<double>(r.test_points.row(k).data(),
                                                   r.test_points.row(k).data() + r.test_points.cols()));
  for (const MethodReport& m : r.reports)
    j["methods"][m.method] = {{"epsilon", m.epsilon},
                              {"epsilon_sum", m.epsilon_sum},
                              {"hellinger", m.hellinger},
                              {"epsilon_per_test_point", m.epsilon_per_test_point}};
  std::ofstream os = detail::open_out(p.report());
  os << j.dump(2) << '\n';
}

/// Evaluates the run's checkpoints against ground truth and writes table1.csv, hellinger.csv,
/// the PDF tables and report.json.
inline EvaluationResult cmd_evaluate(const RunConfig& c) {
  validate(c);
  const RunPaths p{c.output_dir};
  const BenchmarkSpec spec = c.spec();
  std::vector<Checkpoint> cks;
  for (const char* method : {"dpc", "data_only"}) {
    if (!fs::exists(p.checkpoint(method)))
      throw IoError("missing checkpoint '" + p.checkpoint(method).string() + "'; run train first");
    cks.push_back(load_checkpoint(p.checkpoint(method)));
    const DpcModel& m = cks.back().state.model;
    if (m.benchmark != c.benchmark || m.regime != regime_name(c.regime))
      throw ConfigError("checkpoint '" + p.checkpoint(method).string() + "' is for " + m.benchmark + "/" +
                        m.regime);
  }
  const EvaluationResult r =
      evaluate_methods(spec, c.regime, &cks[0].state.model, &cks[1].state.model, eval_settings(c));
  write_evaluation(p, c, r);
  std::vector<fs::path> written = {p.table1(), p.hellinger(), p.report()};
  detail::update_manifest(p, c, written);
  return r;
}

/// generate, train and evaluate in one go.
inline EvaluationResult cmd_reproduce(const RunConfig& c, const EpochCallback& cb = {}) {
  cmd_generate(c);
  cmd_train(c, false, cb);
  return cmd_evaluate(c);
}

struct ConvergencePoint {
  std::size_t n_samples = 0;
  double epsilon = 0.0;
  double epsilon_n = 0.0;
};

/// Trains one corrector per training-set size on nested subsets of one dataset and normalizes
/// the time-averaged error by its value at N = 40.
inline std::vector<ConvergencePoint> cmd_convergence(const RunConfig& c, const EpochCallback& cb = {}) {
  validate(c);
  const auto& sizes = c.eval.convergence_sizes;
  if (std::find(sizes.begin(), sizes.end(), std::size_t{40}) == sizes.end())
    throw ConfigError("eval.convergence_sizes must include the reference size 40");
  const std::size_t n_max = *std::max_element(sizes.begin(), sizes.end());
  RunConfig full = c;
  full.data.n_samples = n_max;
  const BenchmarkSpec spec = full.spec();
  const TrajectoryDataset all = simulate_ensemble(spec.true_model, spec.sim_config(c.data.seed),
                                                  spec.param_sampler(), n_max, c.data.n_replications);
  std::vector<ConvergencePoint> out;
  for (std::size_t n : sizes) {
    RunConfig sub = c;
    sub.data.n_samples = n;
    sub.output_dir = (fs::path(c.output_dir) / ("convergence_N" + std::to_string(n))).string();
    const TrainState st = train_method(sub, dataset_head(all, n), false, false, cb);
    const EvaluationResult r = evaluate_methods(spec, c.regime, &st.model, nullptr, eval_settings(c));
    out.push_back({n, find_report(r, "dpc").epsilon, 0.0});
  }
  double ref = 0.0;
  for (const auto& pt : out)
    if (pt.n_samples == 40) ref = pt.epsilon;
  for (auto& pt : out) pt.epsilon_n = pt.epsilon / ref;
  const RunPaths p{c.output_dir};
  std::ofstream os = detail::open_out(p.convergence());
  os.precision(10);
  os << "n_samples,epsilon,epsilon_n\n";
  for (const auto& pt : out) os << pt.n_samples << ',' << pt.epsilon << ',' << pt.epsilon_n << '\n';
  os.close();
  detail::update_manifest(p, c, {p.convergence()});
  return out;
}

}  // namespace dpc
