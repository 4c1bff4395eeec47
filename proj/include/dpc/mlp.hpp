#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpc/autodiff.hpp"
#include "dpc/error.hpp"
#include "dpc/random.hpp"
#include "dpc/sde.hpp"

namespace dpc {

/// Hidden widths of the corrector network.
inline const std::vector<int>& paper_hidden_layers() {
  static const std::vector<int> widths = {64, 256, 512, 256, 64};
  return widths;
}

/// Fully connected network; ELU on every hidden layer, identity on the output.
/// Rows of the input are samples: y = x W + b.
struct MlpParams {
  std::vector<int> dims;  // [d_in, hidden..., d_out]
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;  // 1 x width

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  std::size_t n_layers() const { return weights.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
      n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    return n;
  }
};

inline std::size_t mlp_parameter_count(int d_in, int d_out, const std::vector<int>& hidden) {
  std::size_t n = 0;
  int prev = d_in;
  for (int w : hidden) {
    n += static_cast<std::size_t>(prev) * w + w;
    prev = w;
  }
  return n + static_cast<std::size_t>(prev) * d_out + d_out;
}

/// He-style uniform fan-in initialization, zero biases.
inline MlpParams make_mlp(int d_in, int d_out, const std::vector<int>& hidden, std::uint64_t seed) {
  if (d_in < 1 || d_out < 1) throw ContractError("make_mlp: dimensions must be positive");
  MlpParams p;
  p.dims.push_back(d_in);
  p.dims.insert(p.dims.end(), hidden.begin(), hidden.end());
  p.dims.push_back(d_out);
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    const int fan_in = p.dims[l], fan_out = p.dims[l + 1];
    if (fan_out < 1) throw ContractError("make_mlp: layer widths must be positive");
    const double bound = std::sqrt(6.0 / fan_in);
    NoiseStream s = make_stream(seed, StreamTag::kInit, {l});
    Matrix w(fan_in, fan_out);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = s.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Matrix::Zero(1, fan_out));
  }
  return p;
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

namespace detail {

inline void check_mlp_input(const MlpParams& p, Eigen::Index cols) {
  if (cols != p.input_dim())
    throw DimensionError("mlp layer 0: input has " + std::to_string(cols) +
                         " features, layer expects " + std::to_string(p.input_dim()));
}

}  // namespace detail

/// Inference-only forward pass.
inline Matrix forward_mlp(const MlpParams& p, const Matrix& input) {
  detail::check_mlp_input(p, input.cols());
  Matrix h = input;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    Matrix z(h.rows(), p.weights[l].cols());
    z.noalias() = h * p.weights[l];
    z.rowwise() += p.biases[l].row(0);
    if (l + 1 < p.n_layers()) z = z.unaryExpr([](double x) { return elu(x); });
    h = std::move(z);
  }
  return h;
}

/// Network parameters registered as tape leaves.
struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

inline MlpVars register_mlp(ad::Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    v.weights.push_back(tape.variable(p.weights[l]));
    v.biases.push_back(tape.variable(p.biases[l]));
  }
  return v;
}

/// Forward pass as a composition of primitive tape operations.
inline ad::Var forward_mlp(const MlpParams& p, const MlpVars& vars, ad::Var input) {
  detail::check_mlp_input(p, input.cols());
  ad::Var h = input;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    h = ad::add_row(ad::matmul(h, vars.weights[l]), vars.biases[l]);
    if (l + 1 < p.n_layers()) h = ad::elu(h);
  }
  return h;
}

/// Same function as forward_mlp recorded as one tape node. Only post-activations are kept for
/// the adjoint; ELU'(z) is recovered from y = ELU(z) as 1 for y > 0 and y + 1 otherwise.
inline ad::Var forward_mlp_fused(const MlpParams& p, const MlpVars& vars, ad::Var input) {
  detail::check_mlp_input(p, input.cols());
  ad::Tape& tape = *input.tape();
  const std::size_t n_layers = p.n_layers();
  std::vector<Matrix> acts;
  acts.reserve(n_layers);
  acts.push_back(input.value());
  Matrix out;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& W = vars.weights[l].value();
    Matrix z(acts.back().rows(), W.cols());
    z.noalias() = acts.back() * W;
    z.rowwise() += vars.biases[l].value().row(0);
    if (l + 1 < n_layers) {
      acts.push_back(z.unaryExpr([](double x) { return elu(x); }));
    } else {
      out = std::move(z);
    }
  }
  bool needs = tape.requires_grad(input);
  for (std::size_t l = 0; l < n_layers; ++l)
    needs = needs || tape.requires_grad(vars.weights[l]) || tape.requires_grad(vars.biases[l]);
  return tape.record(
      std::move(out), needs,
      [input, vars, acts = std::move(acts)](ad::Tape& t, const Matrix& g) {
        Matrix delta = g;
        for (std::size_t l = vars.weights.size(); l-- > 0;) {
          const Matrix& a = acts[l];
          if (t.requires_grad(vars.weights[l])) {
            Matrix gw(a.cols(), delta.cols());
            gw.noalias() = a.transpose() * delta;
            t.accumulate(vars.weights[l], gw);
          }
          if (t.requires_grad(vars.biases[l])) t.accumulate(vars.biases[l], delta.colwise().sum());
          if (l == 0 && !t.requires_grad(input)) break;
          Matrix back(delta.rows(), a.cols());
          back.noalias() = delta * vars.weights[l].value().transpose();
          if (l == 0) {
            t.accumulate(input, back);
          } else {
            delta = back.binaryExpr(a, [](double d, double y) { return y > 0.0 ? d : d * (y + 1.0); });
          }
        }
      });
}

}  // namespace dpc
