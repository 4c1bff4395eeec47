#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpc/benchmarks.hpp"
#include "dpc/error.hpp"
#include "dpc/io.hpp"
#include "dpc/mlp.hpp"

namespace dpc {

struct DataBlock {
  std::size_t n_samples = 40;
  std::size_t n_replications = 50;
  std::size_t n_steps = 100;
  double dt = 1e-3;
  std::uint64_t seed = 1;
};

struct TrainBlock {
  int epochs = 2000;
  std::size_t batch_size = 10;
  double lr = 1e-5;
  double lr_factor = 1.0;
  int lr_period = 50;
  std::uint64_t seed = 2;
  double lambda = 0.01;
  double beta_in = 1.0;
  double beta_out = 1.0;
  bool learn_hyperparameters = true;
  int plateau_window = 200;
  double plateau_tol = 1e-4;
  int checkpoint_every = 50;
  std::vector<int> hidden = paper_hidden_layers();
  /// Start the output layer at zero, i.e. from the known physics.
  bool zero_heads = true;
};

struct EvalBlock {
  std::size_t n_times = 20;
  /// Evaluation spans [dt, horizon_factor * training window].
  double horizon_factor = 2.0;
  std::size_t n_test_points = 5;
  std::size_t mc_paths = 10000;
  std::size_t model_paths = 10000;
  std::size_t grid_points = 512;
  std::uint64_t seed = 3;
  std::vector<std::size_t> convergence_sizes = {10, 20, 30, 40};
};

/// One run: benchmark and regime plus the data, training and evaluation settings.
struct RunConfig {
  std::string benchmark = "black_scholes";
  Regime regime = Regime::kDrift;
  Constants constants;  // overrides of benchmark constants (not dt / n_steps)
  DataBlock data;
  TrainBlock train;
  EvalBlock eval;
  std::string output_dir = "runs/black_scholes_drift";

  /// The benchmark with constants, dt and n_steps applied.
  BenchmarkSpec spec() const {
    Constants c = constants;
    c["dt"] = data.dt;
    c["n_steps"] = static_cast<double>(data.n_steps);
    return make_benchmark(benchmark, c);
  }
};

/// Paper settings for a benchmark and regime.
inline RunConfig default_config(const std::string& benchmark, Regime regime) {
  const BenchmarkSpec spec = make_benchmark(benchmark);
  RunConfig c;
  c.benchmark = benchmark;
  c.regime = regime;
  c.data.n_steps = spec.n_steps;
  c.data.dt = spec.dt;
  const LrSchedule lr = spec.lr_schedule(regime);
  c.train.lr = lr.initial;
  c.train.lr_factor = lr.factor;
  c.train.lr_period = lr.period;
  c.output_dir = "runs/" + benchmark + "_" + regime_name(regime);
  return c;
}

inline void validate(const RunConfig& c) {
  if (c.data.n_samples < 1) throw ConfigError("data.n_samples must be at least 1");
  if (c.data.n_replications < 1) throw ConfigError("data.n_replications must be at least 1");
  if (c.data.n_steps < 1) throw ConfigError("data.n_steps must be at least 1");
  if (!(c.data.dt > 0.0)) throw ConfigError("data.dt must be positive");
  if (c.train.epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (c.train.batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (!(c.train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(c.train.lr_factor > 0.0) || c.train.lr_period < 1)
    throw ConfigError("train.lr_factor must be positive and train.lr_period at least 1");
  if (!(c.train.lambda > 0.0) || !(c.train.beta_in > 0.0) || !(c.train.beta_out > 0.0))
    throw ConfigError("train.lambda and bandwidths must be positive");
  if (c.eval.n_times < 1 || c.eval.n_test_points < 1) throw ConfigError("eval needs times and test points");
  if (c.eval.mc_paths < 2 || c.eval.model_paths < 2) throw ConfigError("eval path counts must be at least 2");
  if (c.eval.grid_points < 2) throw ConfigError("eval.grid_points must be at least 2");
  if (!(c.eval.horizon_factor > 0.0)) throw ConfigError("eval.horizon_factor must be positive");
  (void)c.spec();
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"benchmark", c.benchmark},
          {"regime", regime_name(c.regime)},
          {"constants", c.constants},
          {"data",
           {{"n_samples", c.data.n_samples},
            {"n_replications", c.data.n_replications},
            {"n_steps", c.data.n_steps},
            {"dt", c.data.dt},
            {"seed", c.data.seed}}},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"lr", c.train.lr},
            {"lr_factor", c.train.lr_factor},
            {"lr_period", c.train.lr_period},
            {"seed", c.train.seed},
            {"lambda", c.train.lambda},
            {"beta_in", c.train.beta_in},
            {"beta_out", c.train.beta_out},
            {"learn_hyperparameters", c.train.learn_hyperparameters},
            {"plateau_window", c.train.plateau_window},
            {"plateau_tol", c.train.plateau_tol},
            {"checkpoint_every", c.train.checkpoint_every},
            {"hidden", c.train.hidden},
            {"zero_heads", c.train.zero_heads}}},
          {"eval",
           {{"n_times", c.eval.n_times},
            {"horizon_factor", c.eval.horizon_factor},
            {"n_test_points", c.eval.n_test_points},
            {"mc_paths", c.eval.mc_paths},
            {"model_paths", c.eval.model_paths},
            {"grid_points", c.eval.grid_points},
            {"seed", c.eval.seed},
            {"convergence_sizes", c.eval.convergence_sizes}}},
          {"output_dir", c.output_dir}};
}

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst, const std::string& block) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(block + "." + key + " has the wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys,
                           const std::string& block) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + block);
  }
}

}  // namespace detail

/// Missing keys take the paper defaults of the named benchmark and regime.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(j, {"benchmark", "regime", "constants", "data", "train", "eval", "output_dir"},
                         "config");
  std::string bench = "black_scholes", regime = "drift";
  detail::take(j, "benchmark", bench, "config");
  detail::take(j, "regime", regime, "config");
  RunConfig c = default_config(bench, parse_regime(regime));
  detail::take(j, "constants", c.constants, "config");
  detail::take(j, "output_dir", c.output_dir, "config");
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::reject_unknown(d, {"n_samples", "n_replications", "n_steps", "dt", "seed"}, "data");
    detail::take(d, "n_samples", c.data.n_samples, "data");
    detail::take(d, "n_replications", c.data.n_replications, "data");
    detail::take(d, "n_steps", c.data.n_steps, "data");
    detail::take(d, "dt", c.data.dt, "data");
    detail::take(d, "seed", c.data.seed, "data");
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t, {"epochs", "batch_size", "lr", "lr_factor", "lr_period", "seed", "lambda",
                               "beta_in", "beta_out", "learn_hyperparameters", "plateau_window",
                               "plateau_tol", "checkpoint_every", "hidden", "zero_heads"},
                           "train");
    detail::take(t, "epochs", c.train.epochs, "train");
    detail::take(t, "batch_size", c.train.batch_size, "train");
    detail::take(t, "lr", c.train.lr, "train");
    detail::take(t, "lr_factor", c.train.lr_factor, "train");
    detail::take(t, "lr_period", c.train.lr_period, "train");
    detail::take(t, "seed", c.train.seed, "train");
    detail::take(t, "lambda", c.train.lambda, "train");
    detail::take(t, "beta_in", c.train.beta_in, "train");
    detail::take(t, "beta_out", c.train.beta_out, "train");
    detail::take(t, "learn_hyperparameters", c.train.learn_hyperparameters, "train");
    detail::take(t, "plateau_window", c.train.plateau_window, "train");
    detail::take(t, "plateau_tol", c.train.plateau_tol, "train");
    detail::take(t, "checkpoint_every", c.train.checkpoint_every, "train");
    detail::take(t, "hidden", c.train.hidden, "train");
    detail::take(t, "zero_heads", c.train.zero_heads, "train");
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::reject_unknown(e, {"n_times", "horizon_factor", "n_test_points", "mc_paths", "model_paths",
                               "grid_points", "seed", "convergence_sizes"},
                           "eval");
    detail::take(e, "n_times", c.eval.n_times, "eval");
    detail::take(e, "horizon_factor", c.eval.horizon_factor, "eval");
    detail::take(e, "n_test_points", c.eval.n_test_points, "eval");
    detail::take(e, "mc_paths", c.eval.mc_paths, "eval");
    detail::take(e, "model_paths", c.eval.model_paths, "eval");
    detail::take(e, "grid_points", c.eval.grid_points, "eval");
    detail::take(e, "seed", c.eval.seed, "eval");
    detail::take(e, "convergence_sizes", c.eval.convergence_sizes, "eval");
  }
  validate(c);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const std::filesystem::path& path, const RunConfig& c) {
  std::ofstream os = detail::open_out(path);
  os << to_json(c).dump(2) << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

inline std::string config_hash(const RunConfig& c) { return string_hash(to_json(c).dump()); }

}  // namespace dpc
