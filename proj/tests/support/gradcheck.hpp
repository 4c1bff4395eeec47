#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dpc/autodiff.hpp"
#include "dpc/random.hpp"

namespace dpc::testing {

inline Matrix random_matrix(NoiseStream& s, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = scale * s.normal();
  return m;
}

/// Largest relative error between reverse-mode gradients and central differences of a loss
/// built from `leaves` by `build`. Relative to max(|fd|, floor).
inline double max_gradient_error(std::vector<Matrix> leaves,
                                 const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
                                 double h = 1e-5, double floor = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix& m : leaves) vars.push_back(tape.variable(m));
  ad::Var loss = build(tape, vars);
  tape.backward(loss);
  std::vector<Matrix> grads;
  for (const ad::Var& v : vars) grads.push_back(tape.grad(v));

  auto eval = [&](const std::vector<Matrix>& ls) {
    ad::Tape t;
    std::vector<ad::Var> vs;
    for (const Matrix& m : ls) vs.push_back(t.constant(m));
    return build(t, vs).scalar();
  };
  double worst = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l)
    for (Eigen::Index k = 0; k < leaves[l].size(); ++k) {
      std::vector<Matrix> plus = leaves, minus = leaves;
      plus[l].data()[k] += h;
      minus[l].data()[k] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
      const double g = grads[l].data()[k];
      worst = std::max(worst, std::abs(fd - g) / std::max(std::abs(fd), floor));
    }
  return worst;
}

}  // namespace dpc::testing
