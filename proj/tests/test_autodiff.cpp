#include <gtest/gtest.h>

#include <cmath>

#include "dpc/autodiff.hpp"
#include "dpc/mlp.hpp"
#include "support/gradcheck.hpp"

using namespace dpc;
using dpc::testing::max_gradient_error;
using dpc::testing::random_matrix;

TEST(Tape, SumGradientIsOnes) {
  ad::Tape t;
  ad::Var x = t.variable(Matrix::Random(3, 4));
  t.backward(ad::sum(x));
  EXPECT_EQ(t.grad(x), Matrix::Ones(3, 4));
}

TEST(Tape, QuadraticFormGradient) {
  NoiseStream s(1);
  const Matrix A = random_matrix(s, 5, 5);
  const Matrix x0 = random_matrix(s, 5, 1);
  ad::Tape t;
  ad::Var x = t.variable(x0);
  ad::Var a = t.constant(A);
  t.backward(ad::matmul(ad::transpose(x), ad::matmul(a, x)));
  const Matrix expected = (A + A.transpose()) * x0;
  EXPECT_LT((t.grad(x) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, RepeatedUseSumsGradients) {
  ad::Tape t;
  ad::Var x = t.variable(Matrix::Constant(1, 1, 3.0));
  ad::Var y = x;
  for (int k = 0; k < 4; ++k) y = ad::mul(y, x);  // x^5
  t.backward(y);
  EXPECT_NEAR(t.grad(x)(0, 0), 5.0 * 81.0, 1e-12);
}

TEST(Tape, BackwardOnNonScalarIsContractError) {
  ad::Tape t;
  ad::Var x = t.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(t.backward(x), ContractError);
}

TEST(Tape, ConstantsGetNoGradient) {
  ad::Tape t;
  ad::Var c = t.constant(Matrix::Ones(2, 2));
  ad::Var x = t.variable(Matrix::Ones(2, 2));
  t.backward(ad::sum(ad::mul(c, x)));
  EXPECT_FALSE(t.requires_grad(c));
  EXPECT_EQ(t.grad(c), Matrix::Zero(2, 2));
}

TEST(Tape, ShapeChecks) {
  ad::Tape t;
  ad::Var a = t.variable(Matrix::Ones(2, 3));
  ad::Var b = t.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(ad::matmul(a, b), DimensionError);
  EXPECT_THROW(ad::add(a, b), DimensionError);
  EXPECT_THROW(ad::trace_product(a, a), DimensionError);
}

TEST(GradCheck, ElementwiseAndReductions) {
  NoiseStream s(2);
  const double err = max_gradient_error(
      {random_matrix(s, 3, 4), random_matrix(s, 3, 4), random_matrix(s, 1, 4), random_matrix(s, 1, 1)},
      [](ad::Tape&, const std::vector<ad::Var>& v) {
        ad::Var a = ad::elu(ad::add_row(ad::mul(v[0], v[1]), v[2]));
        ad::Var b = ad::exp(ad::scale(ad::sub(a, v[1]), v[3]));
        return ad::add(ad::mean(b), ad::scale(ad::sum(a), 0.3));
      });
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, MatmulTransposeTrace) {
  NoiseStream s(3);
  const double err = max_gradient_error(
      {random_matrix(s, 4, 3), random_matrix(s, 3, 4), random_matrix(s, 4, 4)},
      [](ad::Tape&, const std::vector<ad::Var>& v) {
        ad::Var p = ad::matmul(v[0], v[1]);
        return ad::trace_product(p, ad::transpose(v[2]));
      });
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, SquaredDistanceAndScalarMap) {
  NoiseStream s(4);
  const double err = max_gradient_error(
      {random_matrix(s, 5, 3), random_matrix(s, 4, 3), random_matrix(s, 1, 1, 0.3)},
      [](ad::Tape&, const std::vector<ad::Var>& v) {
        ad::Var c = ad::scalar_map(
            v[2], [](double x) { return -0.5 * std::exp(-2.0 * x); },
            [](double x) { return std::exp(-2.0 * x); });
        return ad::sum(ad::exp(ad::scale(ad::sqdist(v[0], v[1]), c)));
      });
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, CholeskySolveAdjoint) {
  NoiseStream s(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix m = random_matrix(s, 5, 5);
    const Matrix spd = m * m.transpose() + 0.5 * Matrix::Identity(5, 5);
    const double err = max_gradient_error(
        {spd, random_matrix(s, 5, 3), random_matrix(s, 3, 5), random_matrix(s, 1, 1)},
        [](ad::Tape&, const std::vector<ad::Var>& v) {
          ad::Var a = ad::add_diagonal(v[0], ad::scalar_map(
                                                 v[3], [](double x) { return std::exp(x); },
                                                 [](double x) { return std::exp(x); }));
          return ad::trace_product(ad::cholesky_solve(a, v[1]), v[2]);
        });
    EXPECT_LT(err, 1e-4);
  }
}

TEST(CholeskySolve, SolvesAndEscalatesJitter) {
  NoiseStream s(6);
  const Matrix m = random_matrix(s, 4, 4);
  const Matrix spd = m * m.transpose() + Matrix::Identity(4, 4);
  const Matrix b = random_matrix(s, 4, 2);
  ad::Tape t;
  const Matrix x = ad::cholesky_solve(t.constant(spd), t.constant(b)).value();
  EXPECT_LT((spd * x - b).cwiseAbs().maxCoeff(), 1e-12);

  // rank one: singular without jitter, solvable with it
  Matrix v = random_matrix(s, 4, 1);
  Matrix singular = v * v.transpose();
  EXPECT_NO_THROW(ad::cholesky_solve(t.constant(singular), t.constant(b)));
  // indefinite beyond any allowed jitter
  Matrix indefinite = -Matrix::Identity(4, 4);
  EXPECT_THROW(ad::cholesky_solve(t.constant(indefinite), t.constant(b), 0.01), SingularGramError);
}

TEST(Tape, DeterministicGradients) {
  auto run = [] {
    NoiseStream s(7);
    const MlpParams p = make_mlp(4, 2, {8, 8}, 3);
    ad::Tape t;
    MlpVars v = register_mlp(t, p);
    ad::Var x = t.constant(random_matrix(s, 6, 4));
    t.backward(ad::sum(ad::exp(forward_mlp(p, v, x))));
    std::vector<Matrix> g;
    for (const auto& w : v.weights) g.push_back(t.grad(w));
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(Mlp, Elu) {
  EXPECT_EQ(elu(0.0), 0.0);
  EXPECT_EQ(elu(1.0), 1.0);
  EXPECT_NEAR(elu(-1.0), std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(elu(-1.0), -0.6321, 1e-4);
}

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  MlpParams p = make_mlp(5, 2, paper_hidden_layers(), 1);
  for (auto& w : p.weights) w.setZero();
  for (auto& b : p.biases) b.setZero();
  NoiseStream s(1);
  EXPECT_EQ(forward_mlp(p, random_matrix(s, 7, 5)), Matrix::Zero(7, 2));
}

TEST(Mlp, SmallNetMatchesHandArithmetic) {
  MlpParams p = make_mlp(2, 1, {3}, 9);
  p.biases[0] << 0.1, -0.2, 0.3;
  p.biases[1] << 0.05;
  const double x0 = 0.7, x1 = -1.3;
  double out = p.biases[1](0, 0);
  for (int h = 0; h < 3; ++h) {
    const double z = x0 * p.weights[0](0, h) + x1 * p.weights[0](1, h) + p.biases[0](0, h);
    const double a = z > 0 ? z : std::exp(z) - 1.0;
    out += a * p.weights[1](h, 0);
  }
  Matrix in(1, 2);
  in << x0, x1;
  EXPECT_NEAR(forward_mlp(p, in)(0, 0), out, 1e-12);
}

TEST(Mlp, ArchitectureAndParameterCount) {
  const MlpParams p = make_mlp(13, 2, paper_hidden_layers(), 0);
  EXPECT_EQ(p.dims, (std::vector<int>{13, 64, 256, 512, 256, 64, 2}));
  // 13*64+64 + 64*256+256 + 256*512+512 + 512*256+256 + 256*64+64 + 64*2+2
  EXPECT_EQ(p.parameter_count(), 297026u);
  EXPECT_EQ(mlp_parameter_count(13, 2, paper_hidden_layers()), 297026u);
}

TEST(Mlp, InitializationBoundsAndZeroBiases) {
  const MlpParams p = make_mlp(13, 2, paper_hidden_layers(), 4);
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const double bound = std::sqrt(6.0 / p.dims[l]);
    EXPECT_LE(p.weights[l].cwiseAbs().maxCoeff(), bound);
    EXPECT_GT(p.weights[l].cwiseAbs().maxCoeff(), 0.5 * bound);
    EXPECT_EQ(p.biases[l], Matrix::Zero(1, p.dims[l + 1]));
  }
  EXPECT_EQ(make_mlp(13, 2, {8}, 4).weights[0], make_mlp(13, 2, {8}, 4).weights[0]);
}

TEST(Mlp, InputWidthMismatchNamesLayer) {
  const MlpParams p = make_mlp(3, 1, {4}, 0);
  try {
    forward_mlp(p, Matrix::Ones(2, 5));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(Mlp, FusedMatchesComposed) {
  NoiseStream s(8);
  const MlpParams p = make_mlp(6, 2, {16, 16, 8}, 5);
  const Matrix x = random_matrix(s, 9, 6);
  const Matrix w = random_matrix(s, 9, 2);
  std::vector<Matrix> g1, g2;
  Matrix v1, v2;
  for (int mode = 0; mode < 2; ++mode) {
    ad::Tape t;
    MlpVars v = register_mlp(t, p);
    ad::Var in = t.variable(x);
    ad::Var out = mode == 0 ? forward_mlp(p, v, in) : forward_mlp_fused(p, v, in);
    t.backward(ad::sum(ad::mul(ad::exp(out), t.constant(w))));
    auto& g = mode == 0 ? g1 : g2;
    (mode == 0 ? v1 : v2) = out.value();
    g.push_back(t.grad(in));
    for (std::size_t l = 0; l < v.weights.size(); ++l) {
      g.push_back(t.grad(v.weights[l]));
      g.push_back(t.grad(v.biases[l]));
    }
  }
  EXPECT_LT((v1 - v2).cwiseAbs().maxCoeff(), 1e-13);
  for (std::size_t k = 0; k < g1.size(); ++k)
    EXPECT_LT((g1[k] - g2[k]).cwiseAbs().maxCoeff(), 1e-11 * (1.0 + g1[k].cwiseAbs().maxCoeff()));
}

TEST(GradCheck, RandomMlpWithScalarHead) {
  NoiseStream s(9);
  for (int trial = 0; trial < 3; ++trial) {
    const MlpParams p = make_mlp(5, 3, {8, 16, 8}, 100 + static_cast<std::uint64_t>(trial));
    const Matrix x = random_matrix(s, 4, 5);
    const Matrix head = random_matrix(s, 3, 1);
    std::vector<Matrix> leaves;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
      leaves.push_back(p.weights[l]);
      leaves.push_back(p.biases[l]);
    }
    const double err = max_gradient_error(leaves, [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      MlpVars mv;
      for (std::size_t l = 0; l < p.n_layers(); ++l) {
        mv.weights.push_back(v[2 * l]);
        mv.biases.push_back(v[2 * l + 1]);
      }
      return ad::sum(ad::exp(ad::scale(ad::matmul(forward_mlp_fused(p, mv, t.constant(x)), t.constant(head)), 0.3)));
    });
    EXPECT_LT(err, 1e-4);
  }
}
