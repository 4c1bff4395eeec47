#pragma once

#include <cmath>

#include "dpc/sde.hpp"

namespace dpc::testing {

/// Squared-exponential gram by explicit double loop.
inline Matrix loop_gram(const Matrix& a, const Matrix& b, double beta) {
  Matrix g(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) d += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
      g(i, j) = std::exp(-d / (2.0 * beta * beta));
    }
  return g;
}

/// ||C_d - C_s||^2_HS with C = Psi (K + lambda I)^-1 Phi^T, written over the stacked sample set
/// as Tr(W^T L W K) with W = blockdiag((K_d + lambda I)^-1, -(K_s + lambda I)^-1) and explicit
/// inverses.
inline double cmmd_oracle(const Matrix& in_t, const Matrix& out_t, const Matrix& in_p, const Matrix& out_p,
                          double lambda, double beta_in, double beta_out) {
  const Eigen::Index n = in_t.rows(), np = in_p.rows();
  Matrix in_all(n + np, in_t.cols()), out_all(n + np, out_t.cols());
  in_all << in_t, in_p;
  out_all << out_t, out_p;
  const Matrix K = loop_gram(in_all, in_all, beta_in);
  const Matrix L = loop_gram(out_all, out_all, beta_out);
  Matrix W = Matrix::Zero(n + np, n + np);
  W.topLeftCorner(n, n) = (K.topLeftCorner(n, n) + lambda * Matrix::Identity(n, n)).inverse();
  W.bottomRightCorner(np, np) = -(K.bottomRightCorner(np, np) + lambda * Matrix::Identity(np, np)).inverse();
  return (W.transpose() * L * W * K).trace();
}

}  // namespace dpc::testing
