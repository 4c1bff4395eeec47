#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dpc/autodiff.hpp"
#include "dpc/benchmarks.hpp"
#include "dpc/error.hpp"
#include "dpc/kernel.hpp"
#include "dpc/mlp.hpp"
#include "dpc/random.hpp"
#include "dpc/sde.hpp"

namespace dpc {

inline constexpr int kLatentDim = 10;

/// Per-column affine map x -> (x - mean) / scale.
struct Standardizer {
  RowVector mean;
  RowVector scale;

  static Standardizer identity(Eigen::Index n) {
    return {RowVector::Zero(n), RowVector::Ones(n)};
  }

  /// Column statistics of `x`; zero spreads are replaced by 1.
  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    s.scale = ((x.rowwise() - s.mean).colwise().squaredNorm() / static_cast<double>(x.rows()))
                  .cwiseSqrt();
    for (Eigen::Index k = 0; k < s.scale.size(); ++k)
      if (!(s.scale[k] > 1e-12)) s.scale[k] = 1.0;
    return s;
  }

  Matrix apply(const Matrix& x) const {
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  }
};

inline bool operator==(const Standardizer& a, const Standardizer& b) {
  return a.mean == b.mean && a.scale == b.scale;
}

/// Known physics plus the generative corrector network and the learnable CMMD hyperparameters.
struct DpcModel {
  std::string benchmark;
  std::string regime;
  bool data_only = false;
  SdeModel known;
  Qoi qoi;
  int corrected_component = 0;
  int latent_dim = kLatentDim;
  double dt = 1e-3;
  std::size_t train_steps = 100;

  MlpParams net;
  Matrix log_lambda = Matrix::Constant(1, 1, std::log(0.01));
  Matrix log_beta_in = Matrix::Constant(1, 1, 0.0);
  Matrix log_beta_out = Matrix::Constant(1, 1, 0.0);

  Standardizer state_std;
  Standardizer param_std;
  /// Pseudo drift = drift_scale * head 0, pseudo diffusion = diffusion_scale * head 1.
  double drift_scale = 1.0;
  double diffusion_scale = 1.0;
  /// Standardization of the flattened QoI trajectory used as CMMD output feature.
  Standardizer feature_std;

  int dim_state() const { return known.dim_state; }
  int dim_params() const { return known.dim_params; }
  int input_dim() const { return dim_state() + dim_params() + latent_dim; }

  KernelConfig kernel() const {
    return {std::exp(log_lambda(0, 0)), std::exp(log_beta_in(0, 0)), std::exp(log_beta_out(0, 0))};
  }

  /// Network weights and biases followed by log lambda, log beta_in, log beta_out.
  std::vector<Matrix*> trainable() {
    std::vector<Matrix*> out;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
      out.push_back(&net.weights[l]);
      out.push_back(&net.biases[l]);
    }
    out.push_back(&log_lambda);
    out.push_back(&log_beta_in);
    out.push_back(&log_beta_out);
    return out;
  }
};

struct DpcOptions {
  std::vector<int> hidden = paper_hidden_layers();
  int latent_dim = kLatentDim;
  std::uint64_t init_seed = 0;
  double lambda = 0.01;
  double beta_in = 1.0;
  double beta_out = 1.0;
  /// Train a pure neural SDE (f_k = g_k = 0) instead of correcting the known physics.
  bool data_only = false;
  /// Zero the output layer so the untrained corrector is exactly the known physics.
  bool zero_heads = false;
};

namespace detail {

inline Matrix qoi_trajectories(const TrajectoryDataset& data, const Qoi& qoi,
                               const std::vector<std::size_t>& samples, std::size_t n_steps) {
  const std::size_t m = data.n_replications;
  Matrix out(static_cast<Eigen::Index>(samples.size() * m), static_cast<Eigen::Index>(n_steps));
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < n_steps; ++t)
        out(static_cast<Eigen::Index>(a * m + j), static_cast<Eigen::Index>(t)) =
            qoi(data.state(samples[a], j, t + 1));
  return out;
}

inline double rms(double sum_sq, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(n));
}

}  // namespace detail

/// Scale of each correction head: the larger of the corresponding known-physics term and an
/// estimate of the same term from the data, both as root mean squares over the training states.
inline std::pair<double, double> correction_scales(const SdeModel& known,
                                                   const TrajectoryDataset& data, int component) {
  const std::size_t n = data.n_samples, m = data.n_replications, nt = data.n_steps;
  const double horizon = data.dt * static_cast<double>(nt);
  // replicate-averaged rate of change of the corrected component
  double rate_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mean_rate = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      mean_rate += (data.at(i, j, nt, component) - data.at(i, j, 0, component)) / horizon;
    mean_rate /= static_cast<double>(m);
    rate_sq += mean_rate * mean_rate;
  }
  // cross-replication spread of increments at fixed (sample, step)
  double spread = 0.0;
  std::size_t spread_n = 0;
  if (m > 1) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < nt; ++t) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double d = data.at(i, j, t + 1, component) - data.at(i, j, t, component);
          s1 += d;
          s2 += d * d;
        }
        const double var = (s2 - s1 * s1 / static_cast<double>(m)) / static_cast<double>(m - 1);
        spread += std::max(var, 0.0) / data.dt;
        ++spread_n;
      }
  }
  double f_sq = 0.0, g_sq = 0.0;
  std::size_t count = 0;
  std::array<double, kMaxStateDim> f{}, g{};
  for (std::size_t i = 0; i < n; ++i) {
    const Vector p = data.param_row(i);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < nt; ++t) {
        const auto x = data.state(i, j, t);
        const double time = static_cast<double>(t) * data.dt;
        known.drift(x.data(), p.data(), time, f.data());
        known.diffusion(x.data(), p.data(), time, g.data());
        f_sq += f[component] * f[component];
        g_sq += g[component] * g[component];
        ++count;
      }
  }
  double drift = std::max(detail::rms(rate_sq, n), detail::rms(f_sq, count));
  double diffusion = std::max(spread_n ? std::sqrt(spread / static_cast<double>(spread_n)) : 0.0,
                              detail::rms(g_sq, count));
  if (!(drift > 0.0) || !std::isfinite(drift)) drift = 1.0;
  if (!(diffusion > 0.0) || !std::isfinite(diffusion)) diffusion = 1.0;
  return {drift, diffusion};
}

/// Builds an untrained corrector for `spec` under `regime`, fitting all standardizations and
/// head scales on the training data.
inline DpcModel make_dpc_model(const BenchmarkSpec& spec, Regime regime,
                               const TrajectoryDataset& train_data, const DpcOptions& opt = {}) {
  DpcModel model;
  model.benchmark = spec.name;
  model.regime = regime_name(regime);
  model.data_only = opt.data_only;
  const SdeModel& known = spec.known_model(regime);
  model.known = opt.data_only ? zero_model(known.dim_state, known.dim_params, spec.name + "/data_only")
                              : known;
  if (train_data.dim_state != model.dim_state() || train_data.dim_params != model.dim_params())
    throw DimensionError("training data dimensions do not match benchmark '" + spec.name + "'");
  model.qoi = spec.qoi;
  model.corrected_component = spec.corrected_component;
  model.latent_dim = opt.latent_dim;
  model.dt = train_data.dt;
  model.train_steps = train_data.n_steps;
  model.net = make_mlp(model.input_dim(), 2, opt.hidden, opt.init_seed);
  if (opt.zero_heads) {
    model.net.weights.back().setZero();
    model.net.biases.back().setZero();
  }
  model.log_lambda(0, 0) = std::log(opt.lambda);
  model.log_beta_in(0, 0) = std::log(opt.beta_in);
  model.log_beta_out(0, 0) = std::log(opt.beta_out);

  const std::size_t n = train_data.n_samples, m = train_data.n_replications;
  const std::size_t nt = train_data.n_steps;
  Matrix states(static_cast<Eigen::Index>(n * m * (nt + 1)), train_data.dim_state);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t <= nt; ++t, ++r)
        for (int s = 0; s < train_data.dim_state; ++s) states(r, s) = train_data.at(i, j, t, s);
  model.state_std = Standardizer::fit(states);
  model.param_std = Standardizer::fit(train_data.params);
  std::tie(model.drift_scale, model.diffusion_scale) =
      correction_scales(model.known, train_data, model.corrected_component);

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  model.feature_std = Standardizer::fit(detail::qoi_trajectories(train_data, model.qoi, all, nt));
  // |a - b|^2 of standardized trajectories grows with their length; keep it O(1).
  model.feature_std.scale *= std::sqrt(static_cast<double>(nt));
  return model;
}

/// Network input rows [standardized state, standardized params, z].
inline Matrix network_input(const DpcModel& model, const Matrix& states, const Matrix& params_std,
                            const Matrix& z) {
  Matrix in(states.rows(), model.input_dim());
  in.leftCols(model.dim_state()) = model.state_std.apply(states);
  in.middleCols(model.dim_state(), model.dim_params()) = params_std;
  in.rightCols(model.latent_dim) = z;
  return in;
}

namespace detail {

/// x + (f_k + e_c F) dt + (g_k + e_c G) o dB for every row; throws on non-finite rows.
inline Matrix corrected_step(const DpcModel& model, const Matrix& x, const Matrix& params,
                             const Matrix& heads, const Matrix& dB, double t,
                             std::size_t step_index) {
  const int ds = model.dim_state();
  const int c = model.corrected_component;
  Matrix next(x.rows(), ds);
  std::array<double, kMaxStateDim> xs{}, f{}, g{};
  Vector p(model.dim_params());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int k = 0; k < ds; ++k) xs[k] = x(r, k);
    p = params.row(r).transpose();
    model.known.drift(xs.data(), p.data(), t, f.data());
    model.known.diffusion(xs.data(), p.data(), t, g.data());
    f[c] = f[c] + model.drift_scale * heads(r, 0);
    g[c] = g[c] + model.diffusion_scale * heads(r, 1);
    for (int k = 0; k < ds; ++k) {
      const double v = xs[k] + f[k] * model.dt + g[k] * dB(r, k);
      if (!std::isfinite(v)) throw DivergenceError(static_cast<std::size_t>(r), 0, step_index);
      next(r, k) = v;
    }
  }
  return next;
}

}  // namespace detail

/// One corrected Euler-Maruyama step for a single state.
inline Vector dpc_step(const DpcModel& model, const Vector& state, const Vector& params,
                       const Vector& z, const Vector& dB, double t = 0.0) {
  if (state.size() != model.dim_state() || params.size() != model.dim_params() ||
      z.size() != model.latent_dim || dB.size() != model.dim_state())
    throw DimensionError("dpc_step: argument sizes do not match the model");
  const Matrix x = state.transpose();
  const Matrix p = params.transpose();
  const Matrix heads = forward_mlp(model.net, network_input(model, x, model.param_std.apply(p),
                                                            z.transpose()));
  return detail::corrected_step(model, x, p, heads, dB.transpose(), t, 0).row(0).transpose();
}

/// Generative rollout of N parameter rows with m replications each; fresh z and dB every step
/// drawn from the per-path streams (seed, i, j). Inference only.
inline TrajectoryDataset rollout(const DpcModel& model, const Matrix& params, const Matrix& x0,
                                 std::size_t n_steps, std::size_t n_replications,
                                 std::uint64_t seed, std::size_t chunk_rows = 4096) {
  if (params.cols() != model.dim_params() || x0.cols() != model.dim_state() ||
      x0.rows() != params.rows())
    throw DimensionError("rollout: parameter/initial-state shapes do not match the model");
  if (n_replications < 1) throw ContractError("rollout: n_replications must be at least 1");
  const std::size_t n = static_cast<std::size_t>(params.rows());
  const int ds = model.dim_state();
  TrajectoryDataset out(n, n_replications, n_steps, ds, model.dim_params());
  out.label = model.benchmark + "/dpc";
  out.seed = seed;
  out.dt = model.dt;
  out.params = params;
  const Matrix params_std = model.param_std.apply(params);
  const std::size_t total = n * n_replications;
  const double sqrt_dt = std::sqrt(model.dt);
  std::optional<DivergenceError> first;  // earliest step, then lowest (i, j)
  for (std::size_t begin = 0; begin < total; begin += chunk_rows) {
    const std::size_t rows = std::min(chunk_rows, total - begin);
    const auto R = static_cast<Eigen::Index>(rows);
    Matrix x(R, ds), p(R, model.dim_params()), ps(R, model.dim_params());
    std::vector<NoiseStream> brownian, latent;
    brownian.reserve(rows);
    latent.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t i = (begin + r) / n_replications, j = (begin + r) % n_replications;
      const auto ri = static_cast<Eigen::Index>(r), ii = static_cast<Eigen::Index>(i);
      x.row(ri) = x0.row(ii);
      p.row(ri) = params.row(ii);
      ps.row(ri) = params_std.row(ii);
      brownian.push_back(make_stream(seed, StreamTag::kBrownian, {i, j}));
      latent.push_back(make_stream(seed, StreamTag::kLatent, {i, j}));
      for (int s = 0; s < ds; ++s) out.at(i, j, 0, s) = x(ri, s);
    }
    Matrix z(R, model.latent_dim), dB(R, ds);
    for (std::size_t t = 0; t < n_steps; ++t) {
      for (Eigen::Index r = 0; r < R; ++r) {
        for (int s = 0; s < ds; ++s) dB(r, s) = sqrt_dt * brownian[r].normal();
        for (int k = 0; k < model.latent_dim; ++k) z(r, k) = latent[r].normal();
      }
      const Matrix heads = forward_mlp(model.net, network_input(model, x, ps, z));
      try {
        x = detail::corrected_step(model, x, p, heads, dB, static_cast<double>(t) * model.dt, t + 1);
      } catch (const DivergenceError& e) {
        const std::size_t row = begin + e.sample();
        if (!first || t + 1 < first->step()) first = DivergenceError(row / n_replications, row % n_replications, t + 1);
        break;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = (begin + r) / n_replications, j = (begin + r) % n_replications;
        for (int s = 0; s < ds; ++s) out.at(i, j, t + 1, s) = x(static_cast<Eigen::Index>(r), s);
      }
    }
  }
  if (first) throw *first;
  return out;
}

/// QoI samples at time t* from n_paths independent rollouts at (xi*, x0*).
inline std::vector<double> predict_pdf(const DpcModel& model, const Vector& xi, const Vector& x0,
                                       double t_star, std::size_t n_paths, std::uint64_t seed) {
  if (t_star < 0.0) throw ContractError("predict_pdf: t* must be non-negative");
  const auto steps = static_cast<std::size_t>(std::llround(t_star / model.dt));
  const TrajectoryDataset d = rollout(model, xi.transpose(), x0.transpose(), steps, n_paths, seed);
  std::vector<double> q(n_paths);
  for (std::size_t j = 0; j < n_paths; ++j) q[j] = model.qoi(d.state(0, j, steps));
  return q;
}

namespace ad {

/// [standardized X, constant block] with the adjoint flowing into X only.
inline Var network_input(const DpcModel& model, Var x, const Matrix& params_std, const Matrix& z) {
  Matrix in = dpc::network_input(model, x.value(), params_std, z);
  const int ds = model.dim_state();
  RowVector inv_scale = model.state_std.scale.cwiseInverse();
  return x.tape()->record(std::move(in), {x}, [x, ds, inv_scale](Tape& t, const Matrix& g) {
    t.accumulate(x, (g.leftCols(ds).array().rowwise() * inv_scale.array()).matrix());
  });
}

/// Recorded corrected Euler-Maruyama step; differentiable in the state and the network heads.
inline Var corrected_step(const DpcModel& model, Var x, Var heads, const Matrix& params,
                          const Matrix& dB, double t, std::size_t step_index) {
  Matrix next = dpc::detail::corrected_step(model, x.value(), params, heads.value(), dB, t, step_index);
  return x.tape()->record(
      std::move(next), {x, heads},
      [&model, x, heads, params, dB, t](Tape& tape, const Matrix& g) {
        const int ds = model.dim_state();
        const int c = model.corrected_component;
        if (tape.requires_grad(heads)) {
          Matrix gh(g.rows(), 2);
          gh.col(0) = g.col(c) * (model.dt * model.drift_scale);
          gh.col(1) = g.col(c).cwiseProduct(dB.col(c)) * model.diffusion_scale;
          tape.accumulate(heads, gh);
        }
        if (!tape.requires_grad(x)) return;
        Matrix gx = g;
        const Matrix& xv = x.value();
        std::array<double, kMaxStateDim * kMaxStateDim> jf{}, jg{};
        std::array<double, kMaxStateDim> xs{};
        Vector p(model.dim_params());
        for (Eigen::Index r = 0; r < xv.rows(); ++r) {
          for (int k = 0; k < ds; ++k) xs[k] = xv(r, k);
          p = params.row(r).transpose();
          model.known.drift_jacobian(xs.data(), p.data(), t, jf.data());
          model.known.diffusion_jacobian(xs.data(), p.data(), t, jg.data());
          for (int k = 0; k < ds; ++k)
            for (int l = 0; l < ds; ++l)
              gx(r, l) += g(r, k) * (jf[k * ds + l] * model.dt + jg[k * ds + l] * dB(r, k));
        }
        tape.accumulate(x, gx);
      });
}

/// rows x n_steps matrix of QoI values of the given states.
inline Var stack_qoi(const Qoi& qoi, const std::vector<Var>& states) {
  if (states.empty()) throw ContractError("stack_qoi: no states");
  Tape& tape = *states.front().tape();
  const Eigen::Index rows = states.front().rows();
  Matrix q(rows, static_cast<Eigen::Index>(states.size()));
  bool needs = false;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const Matrix& x = states[t].value();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = x(r, qoi.component);
      q(r, static_cast<Eigen::Index>(t)) = qoi.absolute ? std::abs(v) : v;
    }
    needs = needs || tape.requires_grad(states[t]);
  }
  return tape.record(std::move(q), needs, [qoi, states](Tape& tp, const Matrix& g) {
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (!tp.requires_grad(states[t])) continue;
      const Matrix& x = states[t].value();
      Matrix gx = Matrix::Zero(x.rows(), x.cols());
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        gx(r, qoi.component) =
            g(r, static_cast<Eigen::Index>(t)) * qoi.derivative(x(r, qoi.component));
      tp.accumulate(states[t], gx);
    }
  });
}

inline Var standardize_columns(Var x, const Standardizer& s) {
  Matrix v = s.apply(x.value());
  RowVector inv = s.scale.cwiseInverse();
  return x.tape()->record(std::move(v), {x}, [x, inv](Tape& t, const Matrix& g) {
    t.accumulate(x, (g.array().rowwise() * inv.array()).matrix());
  });
}

/// Noise streams of one recorded rollout; one Brownian and one latent stream per row.
struct RolloutNoise {
  std::vector<NoiseStream> brownian;
  std::vector<NoiseStream> latent;
};

/// Differentiable rollout; returns the rows x n_steps QoI trajectory (steps 1..n_steps).
/// `model` must outlive the tape's backward pass.
inline Var rollout_qoi(const DpcModel& model, const MlpVars& net, const Matrix& params,
                       const Matrix& x0, std::size_t n_steps, RolloutNoise& noise, Tape& tape) {
  const Eigen::Index rows = params.rows();
  const int ds = model.dim_state();
  if (static_cast<Eigen::Index>(noise.brownian.size()) != rows ||
      static_cast<Eigen::Index>(noise.latent.size()) != rows)
    throw DimensionError("rollout_qoi: one noise stream per row is required");
  const Matrix params_std = model.param_std.apply(params);
  const double sqrt_dt = std::sqrt(model.dt);
  Var x = tape.constant(x0);
  std::vector<Var> states;
  states.reserve(n_steps);
  Matrix z(rows, model.latent_dim), dB(rows, ds);
  for (std::size_t t = 0; t < n_steps; ++t) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (int s = 0; s < ds; ++s) dB(r, s) = sqrt_dt * noise.brownian[r].normal();
      for (int k = 0; k < model.latent_dim; ++k) z(r, k) = noise.latent[r].normal();
    }
    Var in = network_input(model, x, params_std, z);
    Var heads = forward_mlp_fused(model.net, net, in);
    x = corrected_step(model, x, heads, params, dB, static_cast<double>(t) * model.dt, t + 1);
    states.push_back(x);
  }
  return stack_qoi(model.qoi, states);
}

}  // namespace ad

}  // namespace dpc
