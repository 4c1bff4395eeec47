#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dpc/error.hpp"
#include "dpc/optim.hpp"
#include "dpc/sde.hpp"

namespace dpc {

/// Which part of the true physics is withheld from the known model.
enum class Regime { kDrift, kDiffusion, kBoth, kNone };

inline std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kDrift: return "drift";
    case Regime::kDiffusion: return "diffusion";
    case Regime::kBoth: return "both";
    case Regime::kNone: return "none";
  }
  return "none";
}

inline Regime parse_regime(const std::string& s) {
  if (s == "drift" || s == "drift_missing") return Regime::kDrift;
  if (s == "diffusion" || s == "diffusion_missing") return Regime::kDiffusion;
  if (s == "both" || s == "both_missing") return Regime::kBoth;
  if (s == "none") return Regime::kNone;
  throw ConfigError("unknown regime '" + s + "' (expected drift, diffusion, both or none)");
}

struct UniformDist {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

/// Scalar quantity of interest: one state component, optionally its magnitude.
struct Qoi {
  int component = 0;
  bool absolute = false;

  double operator()(std::span<const double> x) const {
    const double v = x[static_cast<std::size_t>(component)];
    return absolute ? std::abs(v) : v;
  }
  double derivative(double v) const { return absolute ? (v < 0.0 ? -1.0 : 1.0) : 1.0; }
};

using Constants = std::map<std::string, double>;

struct BenchmarkSpec {
  std::string name;
  Constants constants;
  SdeModel true_model;
  std::map<Regime, SdeModel> known_models;
  std::vector<UniformDist> param_dists;
  std::function<Vector(const Vector& params)> initial_condition;
  Qoi qoi;
  /// State component that receives the network's pseudo drift and diffusion.
  int corrected_component = 0;
  double dt = 1e-3;
  std::size_t n_steps = 100;
  std::map<Regime, LrSchedule> lr_schedules;

  const SdeModel& known_model(Regime r) const {
    auto it = known_models.find(r);
    if (it == known_models.end())
      throw ConfigError("benchmark '" + name + "' has no '" + regime_name(r) + "' regime");
    return it->second;
  }

  LrSchedule lr_schedule(Regime r) const {
    auto it = lr_schedules.find(r);
    return it == lr_schedules.end() ? lr_schedules.at(Regime::kDrift) : it->second;
  }

  ParamSampler param_sampler() const {
    return [dists = param_dists](NoiseStream& s) {
      Vector p(static_cast<Eigen::Index>(dists.size()));
      for (std::size_t k = 0; k < dists.size(); ++k)
        p[static_cast<Eigen::Index>(k)] = s.uniform(dists[k].lo, dists[k].hi);
      return p;
    };
  }

  SimConfig sim_config(std::uint64_t seed, std::size_t steps = 0) const {
    SimConfig cfg;
    cfg.dt = dt;
    cfg.n_steps = steps == 0 ? n_steps : steps;
    cfg.initial_state = initial_condition;
    cfg.seed = seed;
    return cfg;
  }
};

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"black_scholes", "modified_ou", "sir",
                                                 "duffing_vdp"};
  return names;
}

inline Constants default_constants(const std::string& name) {
  if (name == "black_scholes")
    return {{"x1_lo", 0.0}, {"x1_hi", 0.1}, {"x2_lo", 0.0}, {"x2_hi", 0.4}, {"S0", 1.0},
            {"dt", 1e-3}, {"n_steps", 100}, {"lr_drift", 1e-5}, {"lr_diffusion", 1e-5},
            {"lr_both", 1e-5}, {"lr_factor", 1.0}, {"lr_period", 50}};
  if (name == "modified_ou")
    return {{"nu", 0.2}, {"x1_lo", 0.9}, {"x1_hi", 2.0}, {"x2_lo", 0.1}, {"x2_hi", 1.0},
            {"Y0", 1.0}, {"dt", 1e-3}, {"n_steps", 100}, {"lr_drift", 1e-4},
            {"lr_diffusion", 1e-4}, {"lr_both", 1e-4}, {"lr_factor", 0.95}, {"lr_period", 50}};
  if (name == "sir")
    return {{"alpha", 0.01}, {"beta", 0.5}, {"gamma", 0.5}, {"N_total", 2000.0},
            {"S0_lo", 1200.0}, {"S0_hi", 1800.0}, {"I0_lo", 20.0}, {"I0_hi", 200.0},
            {"dt", 1e-3}, {"n_steps", 100}, {"lr_drift", 1e-6}, {"lr_diffusion", 1e-6},
            {"lr_both", 1e-6}, {"lr_factor", 0.9}, {"lr_period", 50}};
  if (name == "duffing_vdp")
    return {{"alpha", 100.0}, {"sigma", 1e4}, {"xi1_lo", 0.1}, {"xi1_hi", 0.5},
            {"xi2_lo", 5.0}, {"xi2_hi", 50.0}, {"X0", 1.0}, {"Y0", 0.0}, {"dt", 1e-3},
            {"n_steps", 1000}, {"lr_drift", 1e-6}, {"lr_diffusion", 1e-5}, {"lr_both", 1e-6},
            {"lr_factor", 0.95}, {"lr_period", 50}};
  throw ConfigError("unknown benchmark '" + name +
                    "' (expected black_scholes, modified_ou, sir or duffing_vdp)");
}

namespace detail {

inline void fill_common(BenchmarkSpec& b) {
  const Constants& c = b.constants;
  b.dt = c.at("dt");
  if (!(b.dt > 0.0)) throw ConfigError("benchmark '" + b.name + "': dt must be positive");
  const double steps = c.at("n_steps");
  if (steps < 1.0 || steps != std::floor(steps))
    throw ConfigError("benchmark '" + b.name + "': n_steps must be a positive integer");
  b.n_steps = static_cast<std::size_t>(steps);
  const int period = static_cast<int>(c.at("lr_period"));
  b.lr_schedules[Regime::kDrift] = {c.at("lr_drift"), c.at("lr_factor"), period};
  b.lr_schedules[Regime::kDiffusion] = {c.at("lr_diffusion"), c.at("lr_factor"), period};
  b.lr_schedules[Regime::kBoth] = {c.at("lr_both"), c.at("lr_factor"), period};
  b.lr_schedules[Regime::kNone] = b.lr_schedules[Regime::kDrift];
}

inline BenchmarkSpec black_scholes(const Constants& c) {
  BenchmarkSpec b;
  b.name = "black_scholes";
  b.constants = c;
  // x = [S], p = [x1, x2]
  auto f_true = [](const auto* x, const double* p, double, auto* out) { out[0] = p[0] * x[0]; };
  auto g_true = [](const auto* x, const double* p, double, auto* out) { out[0] = p[1] * x[0]; };
  auto f_unit = [](const auto*, const double*, double, auto* out) { out[0] = 1.0; };
  auto g_unit = [](const auto*, const double*, double, auto* out) { out[0] = 1.0; };
  b.true_model = make_sde_model("black_scholes", 1, 2, f_true, g_true);
  b.known_models[Regime::kDrift] = make_sde_model("black_scholes/drift", 1, 2, f_unit, g_true);
  b.known_models[Regime::kDiffusion] = make_sde_model("black_scholes/diffusion", 1, 2, f_true, g_unit);
  b.known_models[Regime::kBoth] = make_sde_model("black_scholes/both", 1, 2, f_unit, g_unit);
  b.true_model.nonnegative = true;
  for (auto& [r, m] : b.known_models) m.nonnegative = true;
  b.known_models[Regime::kNone] = b.true_model;
  b.param_dists = {{"x1", c.at("x1_lo"), c.at("x1_hi")}, {"x2", c.at("x2_lo"), c.at("x2_hi")}};
  const double s0 = c.at("S0");
  b.initial_condition = [s0](const Vector&) { return Vector::Constant(1, s0); };
  b.qoi = {0, false};
  b.corrected_component = 0;
  fill_common(b);
  return b;
}

inline BenchmarkSpec modified_ou(const Constants& c) {
  BenchmarkSpec b;
  b.name = "modified_ou";
  b.constants = c;
  const double nu = c.at("nu");
  // x = [Y], p = [x1, x2]
  auto f_true = [](const auto* x, const double* p, double, auto* out) { out[0] = p[0] - x[0]; };
  auto g_true = [nu](const auto* x, const double* p, double, auto* out) {
    out[0] = (nu * x[0] + 1.0) * p[1];
  };
  auto f_unit = [](const auto*, const double*, double, auto* out) { out[0] = 1.0; };
  auto g_unit = [](const auto*, const double*, double, auto* out) { out[0] = 1.0; };
  b.true_model = make_sde_model("modified_ou", 1, 2, f_true, g_true);
  b.known_models[Regime::kDrift] = make_sde_model("modified_ou/drift", 1, 2, f_unit, g_true);
  b.known_models[Regime::kDiffusion] = make_sde_model("modified_ou/diffusion", 1, 2, f_true, g_unit);
  b.known_models[Regime::kBoth] = make_sde_model("modified_ou/both", 1, 2, f_unit, g_unit);
  b.known_models[Regime::kNone] = b.true_model;
  b.param_dists = {{"x1", c.at("x1_lo"), c.at("x1_hi")}, {"x2", c.at("x2_lo"), c.at("x2_hi")}};
  const double y0 = c.at("Y0");
  b.initial_condition = [y0](const Vector&) { return Vector::Constant(1, y0); };
  b.qoi = {0, false};
  b.corrected_component = 0;
  fill_common(b);
  return b;
}

inline BenchmarkSpec sir(const Constants& c) {
  BenchmarkSpec b;
  b.name = "sir";
  b.constants = c;
  const double alpha = c.at("alpha"), beta = c.at("beta"), gamma = c.at("gamma");
  const double total = c.at("N_total");
  // x = [S, I, R], p = [S0, I0]; noise enters the I equation only.
  auto f_true = [beta, gamma](const auto* x, const double*, double, auto* out) {
    const auto infection = beta * x[0] * x[1];
    out[0] = -infection;
    out[1] = infection - gamma * x[1];
    out[2] = gamma * x[1];
  };
  auto f_ablated = [beta, gamma](const auto* x, const double*, double, auto* out) {
    out[0] = -(beta * x[0] * x[1]);
    out[1] = -(gamma * x[1]);
    out[2] = gamma * x[1];
  };
  auto g_true = [alpha](const auto* x, const double*, double, auto* out) {
    out[0] = 0.0;
    out[1] = alpha * x[1];
    out[2] = 0.0;
  };
  auto g_unit = [](const auto*, const double*, double, auto* out) {
    out[0] = 0.0;
    out[1] = 1.0;
    out[2] = 0.0;
  };
  b.true_model = make_sde_model("sir", 3, 2, f_true, g_true);
  b.known_models[Regime::kDrift] = make_sde_model("sir/drift", 3, 2, f_ablated, g_true);
  b.known_models[Regime::kDiffusion] = make_sde_model("sir/diffusion", 3, 2, f_true, g_unit);
  b.known_models[Regime::kBoth] = make_sde_model("sir/both", 3, 2, f_ablated, g_unit);
  b.true_model.nonnegative = true;
  for (auto& [r, m] : b.known_models) m.nonnegative = true;
  b.known_models[Regime::kNone] = b.true_model;
  b.param_dists = {{"S0", c.at("S0_lo"), c.at("S0_hi")}, {"I0", c.at("I0_lo"), c.at("I0_hi")}};
  b.initial_condition = [total](const Vector& p) {
    Vector x(3);
    x << p[0], p[1], total - p[0] - p[1];
    return x;
  };
  b.qoi = {1, false};
  b.corrected_component = 1;
  fill_common(b);
  return b;
}

inline BenchmarkSpec duffing_vdp(const Constants& c) {
  BenchmarkSpec b;
  b.name = "duffing_vdp";
  b.constants = c;
  const double alpha = c.at("alpha"), sigma = c.at("sigma");
  // x = [X, Y], p = [xi1, xi2]
  auto f_true = [alpha](const auto* x, const double* p, double, auto* out) {
    out[0] = x[1];
    out[1] = p[0] * (1.0 - x[0] * x[0]) * x[1] + p[1] * x[0] - alpha * x[0] * x[0] * x[0];
  };
  auto f_ablated = [alpha](const auto* x, const double* p, double, auto* out) {
    out[0] = x[1];
    out[1] = p[0] * x[1] + p[1] * x[0] - alpha * x[0] * x[0] * x[0];
  };
  auto g_true = [sigma](const auto* x, const double*, double, auto* out) {
    out[0] = 0.0;
    out[1] = sigma * x[0];
  };
  auto g_unit = [](const auto*, const double*, double, auto* out) {
    out[0] = 0.0;
    out[1] = 1.0;
  };
  b.true_model = make_sde_model("duffing_vdp", 2, 2, f_true, g_true);
  b.known_models[Regime::kDrift] = make_sde_model("duffing_vdp/drift", 2, 2, f_ablated, g_true);
  b.known_models[Regime::kDiffusion] = make_sde_model("duffing_vdp/diffusion", 2, 2, f_true, g_unit);
  b.known_models[Regime::kBoth] = make_sde_model("duffing_vdp/both", 2, 2, f_ablated, g_unit);
  b.known_models[Regime::kNone] = b.true_model;
  b.param_dists = {{"xi1", c.at("xi1_lo"), c.at("xi1_hi")}, {"xi2", c.at("xi2_lo"), c.at("xi2_hi")}};
  const double x0 = c.at("X0"), y0 = c.at("Y0");
  b.initial_condition = [x0, y0](const Vector&) {
    Vector x(2);
    x << x0, y0;
    return x;
  };
  b.qoi = {0, true};
  b.corrected_component = 1;
  fill_common(b);
  return b;
}

}  // namespace detail

/// Builds one of the four benchmarks; `overrides` replaces named constants.
inline BenchmarkSpec make_benchmark(const std::string& name, const Constants& overrides = {}) {
  Constants c = default_constants(name);
  for (const auto& [key, value] : overrides) {
    if (!c.contains(key))
      throw ConfigError("benchmark '" + name + "' has no constant named '" + key + "'");
    c[key] = value;
  }
  if (name == "black_scholes") return detail::black_scholes(c);
  if (name == "modified_ou") return detail::modified_ou(c);
  if (name == "sir") return detail::sir(c);
  return detail::duffing_vdp(c);
}

inline nlohmann::json benchmark_to_json(const BenchmarkSpec& b) {
  return {{"name", b.name}, {"constants", b.constants}};
}

inline BenchmarkSpec benchmark_from_json(const nlohmann::json& j) {
  if (!j.contains("name")) throw ConfigError("benchmark block has no 'name'");
  Constants c;
  if (j.contains("constants")) c = j.at("constants").get<Constants>();
  return make_benchmark(j.at("name").get<std::string>(), c);
}

}  // namespace dpc
