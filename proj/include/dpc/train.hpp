#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "dpc/autodiff.hpp"
#include "dpc/dpc.hpp"
#include "dpc/error.hpp"
#include "dpc/kernel.hpp"
#include "dpc/log.hpp"
#include "dpc/optim.hpp"
#include "dpc/random.hpp"

namespace dpc {

struct TrainConfig {
  int epochs = 2000;
  /// Parameter realizations per mini-batch; every one contributes all its replications.
  std::size_t batch_size = 10;
  LrSchedule lr{1e-4, 1.0, 1};
  std::uint64_t seed = 0;
  /// Early stop when the mean loss of the last window moved less than plateau_tol relative
  /// to the window before it. 0 disables.
  int plateau_window = 200;
  double plateau_tol = 1e-4;
  bool learn_hyperparameters = true;
  int checkpoint_every = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double lambda = 0.0;
  double beta_in = 0.0;
  double beta_out = 0.0;
  double wall_seconds = 0.0;
  int skipped_batches = 0;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  DpcModel model;
  AdamState adam;
  int epoch = 0;  // epochs completed
  std::vector<EpochRecord> history;
};

inline TrainState start_training(DpcModel model) {
  TrainState s;
  s.model = std::move(model);
  s.adam = AdamState(s.model.trainable());
  return s;
}

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  NoiseStream s = make_stream(seed, StreamTag::kShuffle, {static_cast<std::uint64_t>(epoch)});
  for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[s.next_u64() % k]);
  return order;
}

}  // namespace detail

/// Loss and gradients of one mini-batch.
struct BatchResult {
  double loss = 0.0;
  std::vector<Matrix> grads;  // aligned with DpcModel::trainable()
};

/// CMMD between the batch's data trajectories and a differentiable corrected rollout from the
/// same initial conditions, backpropagated through every step.
inline BatchResult batch_loss(const DpcModel& model, const TrajectoryDataset& data,
                              const std::vector<std::size_t>& samples, std::uint64_t seed,
                              std::uint64_t epoch, bool with_grad = true) {
  const std::size_t m = data.n_replications;
  const std::size_t nt = data.n_steps;
  const auto rows = static_cast<Eigen::Index>(samples.size() * m);
  Matrix params(rows, data.dim_params), x0(rows, data.dim_state);
  ad::RolloutNoise noise;
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t j = 0; j < m; ++j) {
      const auto r = static_cast<Eigen::Index>(a * m + j);
      const std::size_t i = samples[a];
      params.row(r) = data.params.row(static_cast<Eigen::Index>(i));
      for (int s = 0; s < data.dim_state; ++s) x0(r, s) = data.at(i, j, 0, s);
      noise.brownian.push_back(make_stream(seed, StreamTag::kBrownian, {epoch, i, j}));
      noise.latent.push_back(make_stream(seed, StreamTag::kLatent, {epoch, i, j}));
    }

  ad::Tape tape;
  MlpVars net = register_mlp(tape, model.net);
  ad::Var log_lambda = tape.variable(model.log_lambda);
  ad::Var log_beta_in = tape.variable(model.log_beta_in);
  ad::Var log_beta_out = tape.variable(model.log_beta_out);

  ad::Var predicted = ad::rollout_qoi(model, net, params, x0, nt, noise, tape);
  ad::Var out_p = ad::standardize_columns(predicted, model.feature_std);
  ad::Var out_t = tape.constant(
      model.feature_std.apply(detail::qoi_trajectories(data, model.qoi, samples, nt)));
  ad::Var cond = tape.constant(model.param_std.apply(params));
  ad::Var loss = ad::cmmd2(cond, out_t, cond, out_p, log_lambda, log_beta_in, log_beta_out);

  BatchResult result;
  result.loss = loss.scalar();
  if (!with_grad || !std::isfinite(result.loss)) return result;
  tape.backward(loss);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    result.grads.push_back(tape.grad(net.weights[l]));
    result.grads.push_back(tape.grad(net.biases[l]));
  }
  result.grads.push_back(tape.grad(log_lambda));
  result.grads.push_back(tape.grad(log_beta_in));
  result.grads.push_back(tape.grad(log_beta_out));
  return result;
}

/// Mini-batch CMMD training of the corrector with Adam. Continues from `state.epoch`.
/// `on_epoch` sees every finished epoch; returning false stops training.
inline void train(TrainState& state, const TrajectoryDataset& data, const TrainConfig& cfg,
                  const std::function<bool(const TrainState&, const EpochRecord&)>& on_epoch = {}) {
  DpcModel& model = state.model;
  if (cfg.batch_size < 2) throw ContractError("train: batch size must be at least 2");
  if (data.n_samples < 1) throw ContractError("train: empty dataset");
  if (data.dim_state != model.dim_state() || data.dim_params != model.dim_params())
    throw DimensionError("train: dataset dimensions do not match the model");
  if (std::abs(data.dt - model.dt) > 1e-15)
    throw ContractError("train: dataset time step differs from the model's");

  const auto t_begin = std::chrono::steady_clock::now();
  std::vector<Matrix*> params = model.trainable();
  const std::size_t n_hyper = 3;
  int consecutive_bad = 0;
  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    state.adam.learning_rate = cfg.lr.at(epoch);
    const std::vector<std::size_t> order = detail::epoch_order(data.n_samples, cfg.seed, epoch);
    double loss_sum = 0.0;
    int n_good = 0, n_skipped = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::vector<std::size_t> batch(
          order.begin() + static_cast<std::ptrdiff_t>(begin),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + cfg.batch_size)));
      BatchResult br;
      try {
        br = batch_loss(model, data, batch, cfg.seed, static_cast<std::uint64_t>(epoch));
      } catch (const DivergenceError& e) {
        log_warn(std::string("training rollout diverged: ") + e.what());
        br.loss = std::numeric_limits<double>::quiet_NaN();
      } catch (const SingularGramError& e) {
        log_warn(std::string("training loss failed: ") + e.what());
        br.loss = std::numeric_limits<double>::quiet_NaN();
      }
      bool applied = false;
      if (std::isfinite(br.loss)) {
        if (!cfg.learn_hyperparameters)
          for (std::size_t k = br.grads.size() - n_hyper; k < br.grads.size(); ++k)
            br.grads[k].setZero();
        applied = adam_step(state.adam, params, br.grads);
      }
      if (!applied) {
        ++n_skipped;
        log_warn("epoch " + std::to_string(epoch) + ": non-finite loss or gradient, update skipped");
        if (++consecutive_bad >= 3)
          throw Error(ErrorCategory::kNumerical,
                      "training aborted after three consecutive non-finite losses (epoch " +
                          std::to_string(epoch) + ", lambda=" +
                          std::to_string(model.kernel().lambda) + ")");
        continue;
      }
      consecutive_bad = 0;
      loss_sum += br.loss;
      ++n_good;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = state.adam.learning_rate;
    rec.loss = n_good > 0 ? loss_sum / n_good : std::numeric_limits<double>::quiet_NaN();
    const KernelConfig k = model.kernel();
    rec.lambda = k.lambda;
    rec.beta_in = k.beta_in;
    rec.beta_out = k.beta_out;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    rec.skipped_batches = n_skipped;
    state.history.push_back(rec);
    state.epoch = epoch + 1;
    log_info("epoch " + std::to_string(epoch) + " loss " + std::to_string(rec.loss));
    if (on_epoch && !on_epoch(state, rec)) break;

    const auto w = static_cast<std::size_t>(cfg.plateau_window);
    if (w > 0 && state.history.size() >= 2 * w) {
      double recent = 0.0, before = 0.0;
      const std::size_t h = state.history.size();
      for (std::size_t q = 0; q < w; ++q) {
        recent += state.history[h - 1 - q].loss;
        before += state.history[h - 1 - w - q].loss;
      }
      if (std::abs(recent - before) < cfg.plateau_tol * std::abs(before)) {
        log_info("loss plateau reached at epoch " + std::to_string(epoch));
        break;
      }
    }
  }
}

}  // namespace dpc
