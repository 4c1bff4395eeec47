#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpc/benchmarks.hpp"
#include "dpc/dpc.hpp"
#include "dpc/error.hpp"
#include "dpc/evaluation.hpp"
#include "dpc/log.hpp"
#include "dpc/random.hpp"
#include "dpc/sde.hpp"

namespace dpc {

struct EvalSettings {
  std::size_t n_times = 20;
  double horizon_factor = 2.0;
  std::size_t n_test_points = 5;
  std::size_t mc_paths = 10000;
  std::size_t model_paths = 10000;
  std::size_t grid_points = 512;
  std::uint64_t seed = 3;
  /// Also compare the ground truth with an independent ground-truth ensemble.
  bool noise_floor = false;
};

struct MethodReport {
  std::string method;  // dpc, data_only, physics_only
  std::string benchmark;
  std::string regime;
  std::vector<double> times;
  std::vector<double> hellinger;  // H(t) averaged over test points
  double epsilon = 0.0;           // mean of H(t)
  double epsilon_sum = 0.0;       // sum of H(t)
  double epsilon_n = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> epsilon_per_test_point;
};

/// KDEs of every method and the ground truth at one time, on a grid shared by all of them.
struct PdfTable {
  double time = 0.0;
  std::vector<double> grid;
  std::vector<std::string> columns;  // ground_truth first
  std::vector<std::vector<double>> densities;
};

struct EvaluationResult {
  std::vector<MethodReport> reports;
  Matrix test_points;
  std::vector<double> times;
  std::vector<std::size_t> steps;
  /// Test point 0 only.
  std::vector<PdfTable> pdfs;
  std::optional<MethodReport> noise_floor;
};

/// n time indices equally spaced over [1, round(horizon_factor * train_steps)].
inline std::vector<std::size_t> eval_steps(std::size_t train_steps, std::size_t n_times,
                                           double horizon_factor) {
  if (n_times < 1) throw ContractError("eval_steps: need at least one time");
  const auto last = static_cast<std::size_t>(std::llround(horizon_factor * static_cast<double>(train_steps)));
  if (last < 1) throw ContractError("eval_steps: evaluation horizon is shorter than one step");
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k < n_times; ++k) {
    const double u = n_times == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(n_times - 1);
    s.push_back(static_cast<std::size_t>(std::llround(1.0 + u * static_cast<double>(last - 1))));
  }
  return s;
}

/// Fresh parameter draws from the benchmark distributions, independent of any training stream.
inline Matrix draw_test_points(const BenchmarkSpec& spec, std::size_t n, std::uint64_t seed) {
  const ParamSampler sampler = spec.param_sampler();
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.param_dists.size()));
  for (std::size_t k = 0; k < n; ++k) {
    NoiseStream s = make_stream(seed, StreamTag::kTestPoints, {k});
    out.row(static_cast<Eigen::Index>(k)) = sampler(s).transpose();
  }
  return out;
}

namespace detail {

/// QoI samples per evaluation step, from a dataset holding one parameter row.
inline std::vector<std::vector<double>> qoi_at_steps(const TrajectoryDataset& d, const Qoi& qoi,
                                                     const std::vector<std::size_t>& steps) {
  std::vector<std::vector<double>> out(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    out[k].reserve(d.n_replications);
    for (std::size_t j = 0; j < d.n_replications; ++j) out[k].push_back(qoi(d.state(0, j, steps[k])));
  }
  return out;
}

enum : std::uint64_t { kTruthStream = 101, kFloorStream = 102, kPhysicsStream = 103, kModelStream = 104 };

}  // namespace detail

/// Compares physics-only, and whichever trained correctors are given, against Monte Carlo
/// ground truth at fresh test points over [dt, horizon_factor * training window].
/// A method whose rollout diverges at a test point is scored H = 1 there.
inline EvaluationResult evaluate_methods(const BenchmarkSpec& spec, Regime regime,
                                         const DpcModel* dpc_model, const DpcModel* data_only_model,
                                         const EvalSettings& es) {
  EvaluationResult res;
  res.steps = eval_steps(spec.n_steps, es.n_times, es.horizon_factor);
  for (std::size_t s : res.steps) res.times.push_back(static_cast<double>(s) * spec.dt);
  const std::size_t horizon = res.steps.back();
  res.test_points = draw_test_points(spec, es.n_test_points, es.seed);

  struct Method {
    std::string name;
    const DpcModel* model;  // null: physics-only
  };
  std::vector<Method> methods;
  if (dpc_model) methods.push_back({"dpc", dpc_model});
  if (data_only_model) methods.push_back({"data_only", data_only_model});
  methods.push_back({"physics_only", nullptr});

  const std::size_t n_times = res.steps.size();
  std::vector<std::vector<std::vector<double>>> h(methods.size());  // [method][point][time]
  std::vector<std::vector<double>> floor_h;
  const SdeModel& known = spec.known_model(regime);

  for (std::size_t k = 0; k < es.n_test_points; ++k) {
    const Matrix xi = res.test_points.row(static_cast<Eigen::Index>(k));
    const Vector x0 = spec.initial_condition(xi.row(0).transpose());
    SimConfig sc = spec.sim_config(stream_key(es.seed, {detail::kTruthStream, k}), horizon);
    const auto truth = detail::qoi_at_steps(physics_only_rollout(spec.true_model, sc, xi, es.mc_paths),
                                            spec.qoi, res.steps);
    if (es.noise_floor) {
      sc.seed = stream_key(es.seed, {detail::kFloorStream, k});
      const auto other = detail::qoi_at_steps(
          physics_only_rollout(spec.true_model, sc, xi, es.mc_paths), spec.qoi, res.steps);
      floor_h.push_back(time_averaged_error(other, truth, res.times, es.grid_points).series);
    }

    std::vector<std::vector<std::vector<double>>> samples(methods.size());
    for (std::size_t q = 0; q < methods.size(); ++q) {
      try {
        if (methods[q].model) {
          const std::uint64_t seed = stream_key(es.seed, {detail::kModelStream, k, q});
          samples[q] = detail::qoi_at_steps(
              rollout(*methods[q].model, xi, x0.transpose(), horizon, es.model_paths, seed),
              spec.qoi, res.steps);
        } else {
          sc.seed = stream_key(es.seed, {detail::kPhysicsStream, k});
          samples[q] = detail::qoi_at_steps(physics_only_rollout(known, sc, xi, es.model_paths),
                                            spec.qoi, res.steps);
        }
        h[q].push_back(time_averaged_error(samples[q], truth, res.times, es.grid_points).series);
      } catch (const DivergenceError& e) {
        log_warn(methods[q].name + " diverged at test point " + std::to_string(k) + ": " + e.what());
        samples[q].clear();
        h[q].push_back(std::vector<double>(n_times, 1.0));
      }
    }

    if (k == 0) {
      for (std::size_t t = 0; t < n_times; ++t) {
        PdfTable table;
        table.time = res.times[t];
        std::vector<std::span<const double>> sets = {truth[t]};
        for (const auto& s : samples)
          if (!s.empty()) sets.emplace_back(s[t]);
        table.grid = pooled_grid(sets, es.grid_points);
        table.columns.push_back("ground_truth");
        table.densities.push_back(kde(truth[t], table.grid).density);
        for (std::size_t q = 0; q < methods.size(); ++q) {
          table.columns.push_back(methods[q].name);
          table.densities.push_back(samples[q].empty() ? std::vector<double>(table.grid.size(), 0.0)
                                                       : kde(samples[q][t], table.grid).density);
        }
        res.pdfs.push_back(std::move(table));
      }
    }
  }

  auto summarize = [&](const std::string& name, const std::vector<std::vector<double>>& per_point) {
    MethodReport r;
    r.method = name;
    r.benchmark = spec.name;
    r.regime = regime_name(regime);
    r.times = res.times;
    r.hellinger.assign(n_times, 0.0);
    for (const auto& series : per_point) {
      double s = 0.0;
      for (std::size_t t = 0; t < n_times; ++t) {
        r.hellinger[t] += series[t] / static_cast<double>(per_point.size());
        s += series[t];
      }
      r.epsilon_per_test_point.push_back(s / static_cast<double>(n_times));
    }
    for (double v : r.hellinger) r.epsilon_sum += v;
    r.epsilon = r.epsilon_sum / static_cast<double>(n_times);
    return r;
  };
  for (std::size_t q = 0; q < methods.size(); ++q) res.reports.push_back(summarize(methods[q].name, h[q]));
  if (es.noise_floor) res.noise_floor = summarize("ground_truth", floor_h);
  return res;
}

inline const MethodReport& find_report(const EvaluationResult& r, const std::string& method) {
  for (const auto& m : r.reports)
    if (m.method == method) return m;
  throw ContractError("no report for method '" + method + "'");
}

}  // namespace dpc
