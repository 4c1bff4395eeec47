#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpc/error.hpp"
#include "dpc/log.hpp"
#include "dpc/random.hpp"

namespace dpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr int kMaxStateDim = 4;

/// Forward-mode dual number used to differentiate drift/diffusion with respect to the state.
struct Dual {
  double v = 0.0;
  std::array<double, kMaxStateDim> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  friend Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.v + b.v);
    for (int k = 0; k < kMaxStateDim; ++k) r.d[k] = a.d[k] + b.d[k];
    return r;
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.v - b.v);
    for (int k = 0; k < kMaxStateDim; ++k) r.d[k] = a.d[k] - b.d[k];
    return r;
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int k = 0; k < kMaxStateDim; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
    return r;
  }
  friend Dual operator-(const Dual& a) {
    Dual r(-a.v);
    for (int k = 0; k < kMaxStateDim; ++k) r.d[k] = -a.d[k];
    return r;
  }
};

inline double abs_value(double x) { return std::abs(x); }
inline Dual abs_value(const Dual& x) { return x.v < 0.0 ? -x : x; }

/// Drift/diffusion pair of a diagonal-noise Ito SDE  dX = f(X, xi, t) dt + g(X, xi, t) o dB.
///
/// Jacobians with respect to the state are row-major dim_state x dim_state and are needed to
/// backpropagate through rollouts of the known physics.
struct SdeModel {
  using Fn = std::function<void(const double* x, const double* p, double t, double* out)>;

  std::string label;
  int dim_state = 1;
  int dim_params = 0;
  /// States are physically nonnegative (prices, populations); negative excursions are counted.
  bool nonnegative = false;
  Fn drift;
  Fn diffusion;
  Fn drift_jacobian;
  Fn diffusion_jacobian;

  Vector eval_drift(std::span<const double> x, std::span<const double> p, double t) const {
    check_args(x, p);
    Vector out(dim_state);
    drift(x.data(), p.data(), t, out.data());
    return out;
  }

  Vector eval_diffusion(std::span<const double> x, std::span<const double> p, double t) const {
    check_args(x, p);
    Vector out(dim_state);
    diffusion(x.data(), p.data(), t, out.data());
    return out;
  }

 private:
  void check_args(std::span<const double> x, std::span<const double> p) const {
    if (static_cast<int>(x.size()) != dim_state || static_cast<int>(p.size()) != dim_params)
      throw DimensionError("model '" + label + "' expects state of size " +
                           std::to_string(dim_state) + " and params of size " +
                           std::to_string(dim_params));
  }
};

/// Builds an SdeModel from generic functors `f(const T* x, const double* p, double t, T* out)`.
/// The functors are instantiated with double for values and Dual for Jacobians.
template <class DriftFn, class DiffusionFn>
SdeModel make_sde_model(std::string label, int dim_state, int dim_params, DriftFn drift,
                        DiffusionFn diffusion) {
  if (dim_state < 1 || dim_state > kMaxStateDim)
    throw ContractError("state dimension must be in [1, " + std::to_string(kMaxStateDim) + "]");
  auto jacobian = [dim_state](auto fn) {
    return [dim_state, fn](const double* x, const double* p, double t, double* jac) {
      std::array<Dual, kMaxStateDim> xd, out;
      for (int k = 0; k < dim_state; ++k) {
        xd[k] = Dual(x[k]);
        xd[k].d[k] = 1.0;
      }
      fn(xd.data(), p, t, out.data());
      for (int r = 0; r < dim_state; ++r)
        for (int c = 0; c < dim_state; ++c) jac[r * dim_state + c] = out[r].d[c];
    };
  };
  SdeModel m;
  m.label = std::move(label);
  m.dim_state = dim_state;
  m.dim_params = dim_params;
  m.drift = [drift](const double* x, const double* p, double t, double* out) {
    drift(x, p, t, out);
  };
  m.diffusion = [diffusion](const double* x, const double* p, double t, double* out) {
    diffusion(x, p, t, out);
  };
  m.drift_jacobian = jacobian(drift);
  m.diffusion_jacobian = jacobian(diffusion);
  return m;
}

/// f = g = 0; the physics of the data-only surrogate.
inline SdeModel zero_model(int dim_state, int dim_params, std::string label = "zero") {
  auto zero = [dim_state](const auto*, const double*, double, auto* out) {
    for (int k = 0; k < dim_state; ++k) out[k] = 0.0;
  };
  return make_sde_model(std::move(label), dim_state, dim_params, zero, zero);
}

/// Writes state + f dt + g o dB into `out`; returns false if any entry is non-finite.
inline bool euler_maruyama_step_into(const SdeModel& model, const double* state,
                                     const double* params, double t, double dt, const double* dB,
                                     double* out) {
  std::array<double, kMaxStateDim> f{}, g{};
  model.drift(state, params, t, f.data());
  model.diffusion(state, params, t, g.data());
  bool finite = true;
  for (int k = 0; k < model.dim_state; ++k) {
    out[k] = state[k] + f[k] * dt + g[k] * dB[k];
    finite = finite && std::isfinite(out[k]);
  }
  return finite;
}

/// One Euler-Maruyama step with caller-supplied Brownian increment.
inline Vector euler_maruyama_step(const SdeModel& model, std::span<const double> state,
                                  std::span<const double> params, double t, double dt,
                                  std::span<const double> dB, std::size_t step_index = 0) {
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
  if (static_cast<int>(state.size()) != model.dim_state ||
      static_cast<int>(dB.size()) != model.dim_state ||
      static_cast<int>(params.size()) != model.dim_params)
    throw DimensionError("euler_maruyama_step: argument sizes do not match model '" +
                         model.label + "'");
  Vector out(model.dim_state);
  if (!euler_maruyama_step_into(model, state.data(), params.data(), t, dt, dB.data(), out.data()))
    throw DivergenceError(0, 0, step_index);
  return out;
}

struct SimConfig {
  double dt = 1e-3;
  std::size_t n_steps = 100;
  /// Initial state as a function of the parameter realization.
  std::function<Vector(const Vector& params)> initial_state;
  std::uint64_t seed = 0;
};

using ParamSampler = std::function<Vector(NoiseStream&)>;

/// N x m x (Nt + 1) x dim_state trajectories, stored time-major per replication in one buffer.
struct TrajectoryDataset {
  std::string label;
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_replications = 0;
  std::size_t n_steps = 0;
  int dim_state = 0;
  int dim_params = 0;
  Matrix params;  // n_samples x dim_params
  std::vector<double> trajectories;
  std::size_t negative_state_events = 0;

  TrajectoryDataset() = default;
  TrajectoryDataset(std::size_t n, std::size_t m, std::size_t nt, int ds, int dp)
      : n_samples(n),
        n_replications(m),
        n_steps(nt),
        dim_state(ds),
        dim_params(dp),
        params(Matrix::Zero(static_cast<Eigen::Index>(n), dp)),
        trajectories(n * m * (nt + 1) * static_cast<std::size_t>(ds), 0.0) {}

  std::size_t offset(std::size_t i, std::size_t j, std::size_t t) const {
    return ((i * n_replications + j) * (n_steps + 1) + t) * static_cast<std::size_t>(dim_state);
  }
  double& at(std::size_t i, std::size_t j, std::size_t t, int s) {
    return trajectories[offset(i, j, t) + static_cast<std::size_t>(s)];
  }
  double at(std::size_t i, std::size_t j, std::size_t t, int s) const {
    return trajectories[offset(i, j, t) + static_cast<std::size_t>(s)];
  }
  std::span<const double> state(std::size_t i, std::size_t j, std::size_t t) const {
    return {trajectories.data() + offset(i, j, t), static_cast<std::size_t>(dim_state)};
  }
  std::span<double> state(std::size_t i, std::size_t j, std::size_t t) {
    return {trajectories.data() + offset(i, j, t), static_cast<std::size_t>(dim_state)};
  }
  Vector param_row(std::size_t i) const { return params.row(static_cast<Eigen::Index>(i)).transpose(); }

  bool same_shape(const TrajectoryDataset& o) const {
    return n_samples == o.n_samples && n_replications == o.n_replications &&
           n_steps == o.n_steps && dim_state == o.dim_state && dim_params == o.dim_params;
  }
};

inline bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  return a.label == b.label && a.seed == b.seed && a.dt == b.dt && a.same_shape(b) &&
         a.params == b.params && a.trajectories == b.trajectories;
}

namespace detail {

inline void integrate_path(const SdeModel& model, const SimConfig& cfg, const Vector& params,
                           std::size_t i, std::size_t j, TrajectoryDataset& out) {
  const Vector x0 = cfg.initial_state ? cfg.initial_state(params) : Vector::Zero(model.dim_state);
  if (x0.size() != model.dim_state)
    throw DimensionError("initial state has size " + std::to_string(x0.size()) + ", model '" +
                         model.label + "' expects " + std::to_string(model.dim_state));
  for (int s = 0; s < model.dim_state; ++s) out.at(i, j, 0, s) = x0[s];
  NoiseStream noise = make_stream(cfg.seed, StreamTag::kBrownian, {i, j});
  const double sqrt_dt = std::sqrt(cfg.dt);
  std::array<double, kMaxStateDim> dB{};
  for (std::size_t t = 0; t < cfg.n_steps; ++t) {
    for (int s = 0; s < model.dim_state; ++s) dB[s] = sqrt_dt * noise.normal();
    const auto cur = out.state(i, j, t);
    auto next = out.state(i, j, t + 1);
    const double time = static_cast<double>(t) * cfg.dt;
    if (!euler_maruyama_step_into(model, cur.data(), params.data(), time, cfg.dt, dB.data(),
                                  next.data()))
      throw DivergenceError(i, j, t + 1);
    if (model.nonnegative)
      for (double v : next)
        if (v < 0.0) ++out.negative_state_events;
  }
}

inline void check_sim_config(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ContractError("SimConfig.dt must be positive");
  if (cfg.n_steps < 1) throw ContractError("SimConfig.n_steps must be at least 1");
}

}  // namespace detail

/// Euler-Maruyama trajectories for caller-fixed parameter rows; the physics-only baseline.
/// Brownian increments of path (i, j) come from their own stream, ~ N(0, dt) per step.
inline TrajectoryDataset physics_only_rollout(const SdeModel& model, const SimConfig& cfg,
                                              const Matrix& params, std::size_t n_replications) {
  detail::check_sim_config(cfg);
  if (params.cols() != model.dim_params)
    throw DimensionError("parameter matrix has " + std::to_string(params.cols()) +
                         " columns, model '" + model.label + "' expects " +
                         std::to_string(model.dim_params));
  if (n_replications < 1) throw ContractError("n_replications must be at least 1");
  TrajectoryDataset ds(static_cast<std::size_t>(params.rows()), n_replications, cfg.n_steps,
                       model.dim_state, model.dim_params);
  ds.label = model.label;
  ds.seed = cfg.seed;
  ds.dt = cfg.dt;
  ds.params = params;
  std::optional<DivergenceError> first;
  for (std::size_t i = 0; i < ds.n_samples; ++i) {
    const Vector p = ds.param_row(i);
    for (std::size_t j = 0; j < n_replications; ++j) {
      try {
        detail::integrate_path(model, cfg, p, i, j, ds);
      } catch (const DivergenceError& e) {
        if (!first || e.step() < first->step()) first = e;
      }
    }
  }
  if (first) throw *first;
  if (ds.negative_state_events > 0)
    log_warn("model '" + model.label + "': " + std::to_string(ds.negative_state_events) +
             " negative state entries during integration");
  return ds;
}

/// Draws N parameter realizations, then m independent Brownian paths for each.
inline TrajectoryDataset simulate_ensemble(const SdeModel& model, const SimConfig& cfg,
                                           const ParamSampler& sampler, std::size_t n_samples,
                                           std::size_t n_replications) {
  detail::check_sim_config(cfg);
  if (n_samples < 1) throw ContractError("n_samples must be at least 1");
  Matrix params(static_cast<Eigen::Index>(n_samples), model.dim_params);
  for (std::size_t i = 0; i < n_samples; ++i) {
    NoiseStream s = make_stream(cfg.seed, StreamTag::kParams, {i});
    const Vector p = sampler ? sampler(s) : Vector::Zero(model.dim_params);
    if (p.size() != model.dim_params)
      throw DimensionError("parameter sampler returned " + std::to_string(p.size()) +
                           " values, model '" + model.label + "' expects " +
                           std::to_string(model.dim_params));
    params.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  return physics_only_rollout(model, cfg, params, n_replications);
}

}  // namespace dpc
