#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dpc/error.hpp"
#include "dpc/sde.hpp"

namespace dpc {

/// Step decay: initial * factor^floor(epoch / period). factor == 1 gives a constant rate.
struct LrSchedule {
  double initial = 1e-4;
  double factor = 1.0;
  int period = 1;

  double at(int epoch) const {
    if (epoch < 0) throw ContractError("lr_decay: epoch must be non-negative");
    if (factor == 1.0 || period <= 0) return initial;
    return initial * std::pow(factor, static_cast<double>(epoch / period));
  }
};

inline double lr_decay(const LrSchedule& schedule, int epoch) { return schedule.at(epoch); }

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  AdamState() = default;
  explicit AdamState(const std::vector<Matrix*>& params, double lr = 1e-3) : learning_rate(lr) {
    for (const Matrix* p : params) {
      first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
};

/// Bias-corrected Adam update. Returns false, leaving parameters and state untouched, when any
/// gradient entry is non-finite.
inline bool adam_step(AdamState& state, const std::vector<Matrix*>& params,
                      const std::vector<Matrix>& grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw DimensionError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->rows() != grads[k].rows() || params[k]->cols() != grads[k].cols() ||
        state.first_moment[k].rows() != grads[k].rows() ||
        state.first_moment[k].cols() != grads[k].cols())
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(k));
    if (!grads[k].allFinite()) return false;
  }
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    m = b1 * m + (1.0 - b1) * grads[k];
    v = b2 * v + (1.0 - b2) * grads[k].cwiseAbs2();
    params[k]->array() -= state.learning_rate * (m.array() / c1) /
                          ((v.array() / c2).sqrt() + state.epsilon);
  }
  return true;
}

}  // namespace dpc
