#pragma once

#include <cmath>
#include <string>

#include "dpc/autodiff.hpp"
#include "dpc/error.hpp"
#include "dpc/sde.hpp"

namespace dpc {

/// Squared-exponential kernel with bandwidth beta > 0 and ridge lambda > 0 for the
/// conditional embedding operators. Both are positive by construction when optimized in
/// log space.
struct KernelConfig {
  double lambda = 0.01;
  double beta_in = 1.0;
  double beta_out = 1.0;
};

/// k(a_i, b_j) = exp(-|a_i - b_j|^2 / (2 beta^2)).
inline Matrix se_kernel_gram(const Matrix& a, const Matrix& b, double beta) {
  if (!(beta > 0.0)) throw ContractError("se_kernel_gram: bandwidth must be positive");
  if (a.cols() != b.cols())
    throw DimensionError("se_kernel_gram: feature dimensions " + std::to_string(a.cols()) +
                         " and " + std::to_string(b.cols()) + " differ");
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
  d.rowwise() += nb.transpose();
  return (d.array().max(0.0) * (-0.5 / (beta * beta))).exp().matrix();
}

/// Biased (V-statistic) squared MMD between two sample sets.
inline double mmd2(const Matrix& x, const Matrix& y, double beta) {
  if (x.rows() < 1 || y.rows() < 1) throw ContractError("mmd2: sample sets must be non-empty");
  return se_kernel_gram(x, x, beta).mean() - 2.0 * se_kernel_gram(x, y, beta).mean() +
         se_kernel_gram(y, y, beta).mean();
}

namespace ad {

/// Squared-exponential gram matrix with bandwidth exp(log_beta).
inline Var se_kernel_gram(Var a, Var b, Var log_beta) {
  Var coeff = scalar_map(
      log_beta, [](double lb) { return -0.5 * std::exp(-2.0 * lb); },
      [](double lb) { return std::exp(-2.0 * lb); });
  return exp(scale(sqdist(a, b), coeff));
}

/// Conditional MMD between target (d) and predicted (s) conditional distributions:
///   Tr(K_d Kt_d^-1 L_d Kt_d^-1) + Tr(K_s Kt_s^-1 L_s Kt_s^-1) - 2 Tr(K_sd Kt_d^-1 L_ds Kt_s^-1)
/// with Kt = K + lambda I. Every Kt^-1 product is a Cholesky solve, and the cyclic identity
/// Kt^-1 K = K Kt^-1 turns each trace into Tr((Kt^-1 A)(Kt^-1 B)).
inline Var cmmd2(Var inputs_t, Var outputs_t, Var inputs_p, Var outputs_p, Var log_lambda,
                 Var log_beta_in, Var log_beta_out) {
  if (inputs_t.rows() != outputs_t.rows() || inputs_p.rows() != outputs_p.rows())
    throw DimensionError("cmmd2: input and output row counts differ");
  if (inputs_t.rows() < 1 || inputs_p.rows() < 1)
    throw ContractError("cmmd2: sample sets must be non-empty");
  if (inputs_t.cols() != inputs_p.cols() || outputs_t.cols() != outputs_p.cols())
    throw DimensionError("cmmd2: target and predicted feature dimensions differ");
  const double lambda_value = std::exp(log_lambda.scalar());
  Var lambda = scalar_map(
      log_lambda, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });

  Var k_d = se_kernel_gram(inputs_t, inputs_t, log_beta_in);
  Var k_s = se_kernel_gram(inputs_p, inputs_p, log_beta_in);
  Var k_sd = se_kernel_gram(inputs_p, inputs_t, log_beta_in);
  Var l_d = se_kernel_gram(outputs_t, outputs_t, log_beta_out);
  Var l_s = se_kernel_gram(outputs_p, outputs_p, log_beta_out);
  Var l_ds = se_kernel_gram(outputs_t, outputs_p, log_beta_out);
  Var kt_d = add_diagonal(k_d, lambda);
  Var kt_s = add_diagonal(k_s, lambda);

  Var term_d = trace_product(cholesky_solve(kt_d, k_d, lambda_value),
                             cholesky_solve(kt_d, l_d, lambda_value));
  Var term_s = trace_product(cholesky_solve(kt_s, k_s, lambda_value),
                             cholesky_solve(kt_s, l_s, lambda_value));
  Var cross = trace_product(cholesky_solve(kt_s, k_sd, lambda_value),
                            cholesky_solve(kt_d, l_ds, lambda_value));
  return sub(add(term_d, term_s), scale(cross, 2.0));
}

}  // namespace ad

/// Value-only CMMD.
inline double cmmd2(const Matrix& inputs_t, const Matrix& outputs_t, const Matrix& inputs_p,
                    const Matrix& outputs_p, double lambda, double beta_in, double beta_out) {
  if (!(lambda > 0.0) || !(beta_in > 0.0) || !(beta_out > 0.0))
    throw ContractError("cmmd2: lambda and bandwidths must be positive");
  ad::Tape tape;
  ad::Var v = ad::cmmd2(tape.constant(inputs_t), tape.constant(outputs_t),
                        tape.constant(inputs_p), tape.constant(outputs_p),
                        tape.constant(Matrix::Constant(1, 1, std::log(lambda))),
                        tape.constant(Matrix::Constant(1, 1, std::log(beta_in))),
                        tape.constant(Matrix::Constant(1, 1, std::log(beta_out))));
  return v.scalar();
}

}  // namespace dpc
