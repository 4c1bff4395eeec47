#include <gtest/gtest.h>

#include <cmath>

#include "dpc/benchmarks.hpp"
#include "dpc/sde.hpp"

using namespace dpc;

namespace {

SdeModel gbm() {
  return make_sde_model(
      "gbm", 1, 2, [](const auto* x, const double* p, double, auto* out) { out[0] = p[0] * x[0]; },
      [](const auto* x, const double* p, double, auto* out) { out[0] = p[1] * x[0]; });
}

SdeModel decay() {
  return make_sde_model(
      "decay", 1, 0, [](const auto* x, const double*, double, auto* out) { out[0] = -x[0]; },
      [](const auto*, const double*, double, auto* out) { out[0] = 0.0; });
}

SimConfig config(double dt, std::size_t steps, std::uint64_t seed, double x0 = 1.0) {
  SimConfig c;
  c.dt = dt;
  c.n_steps = steps;
  c.seed = seed;
  c.initial_state = [x0](const Vector&) { return Vector::Constant(1, x0); };
  return c;
}

}  // namespace

TEST(EulerMaruyamaStep, ZeroModelIsIdentity) {
  const SdeModel z = zero_model(3, 1);
  const std::vector<double> s = {1.5, -2.0, 0.25}, p = {4.0}, dB = {0.3, -0.1, 2.0};
  const Vector out = euler_maruyama_step(z, s, p, 0.0, 0.01, dB);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(out[k], s[static_cast<std::size_t>(k)]);
}

TEST(EulerMaruyamaStep, DeterministicBlackScholesStep) {
  const std::vector<double> s = {1.0}, p = {0.05, 0.2}, dB = {0.0};
  EXPECT_NEAR(euler_maruyama_step(gbm(), s, p, 0.0, 0.001, dB)[0], 1.00005, 1e-15);
}

TEST(EulerMaruyamaStep, NoiseEntersElementwise) {
  const std::vector<double> s = {2.0}, p = {0.0, 0.5}, dB = {0.1};
  EXPECT_DOUBLE_EQ(euler_maruyama_step(gbm(), s, p, 0.0, 0.001, dB)[0], 2.0 + 0.5 * 2.0 * 0.1);
}

TEST(EulerMaruyamaStep, NonFiniteResultThrowsWithStep) {
  const SdeModel blow = make_sde_model(
      "blow", 1, 0, [](const auto* x, const double*, double, auto* out) { out[0] = x[0] * 1e308; },
      [](const auto*, const double*, double, auto* out) { out[0] = 0.0; });
  const std::vector<double> s = {1e10}, p = {}, dB = {0.0};
  try {
    euler_maruyama_step(blow, s, p, 0.0, 1.0, dB, 17);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(EulerMaruyamaStep, RejectsBadArguments) {
  const std::vector<double> s = {1.0}, p = {0.05, 0.2}, dB = {0.0}, bad = {1.0, 2.0};
  EXPECT_THROW(euler_maruyama_step(gbm(), s, p, 0.0, 0.0, dB), ContractError);
  EXPECT_THROW(euler_maruyama_step(gbm(), bad, p, 0.0, 0.001, dB), DimensionError);
}

TEST(SimulateEnsemble, ShapeAndInitialState) {
  const BenchmarkSpec bs = make_benchmark("black_scholes");
  const TrajectoryDataset d = simulate_ensemble(bs.true_model, bs.sim_config(1), bs.param_sampler(), 40, 50);
  EXPECT_EQ(d.n_samples, 40u);
  EXPECT_EQ(d.n_replications, 50u);
  EXPECT_EQ(d.n_steps, 100u);
  EXPECT_EQ(d.dim_state, 1);
  EXPECT_EQ(d.trajectories.size(), 40u * 50u * 101u);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 50; ++j) EXPECT_EQ(d.at(i, j, 0, 0), 1.0);
  for (double v : d.trajectories) ASSERT_TRUE(std::isfinite(v));
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_GE(d.params(static_cast<Eigen::Index>(i), 0), 0.0);
    EXPECT_LE(d.params(static_cast<Eigen::Index>(i), 0), 0.1);
    EXPECT_GE(d.params(static_cast<Eigen::Index>(i), 1), 0.0);
    EXPECT_LE(d.params(static_cast<Eigen::Index>(i), 1), 0.4);
  }
}

TEST(SimulateEnsemble, SameSeedBitIdentical) {
  const BenchmarkSpec bs = make_benchmark("black_scholes");
  const auto a = simulate_ensemble(bs.true_model, bs.sim_config(9), bs.param_sampler(), 5, 7);
  const auto b = simulate_ensemble(bs.true_model, bs.sim_config(9), bs.param_sampler(), 5, 7);
  const auto c = simulate_ensemble(bs.true_model, bs.sim_config(10), bs.param_sampler(), 5, 7);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(SimulateEnsemble, ZeroNoiseSinglePathIsEulerRecursion) {
  const auto d = simulate_ensemble(decay(), config(0.01, 50, 3), {}, 1, 1);
  double x = 1.0;
  for (std::size_t t = 1; t <= 50; ++t) {
    x = x + (-x) * 0.01;
    EXPECT_EQ(d.at(0, 0, t, 0), x);
  }
}

TEST(PhysicsOnlyRollout, ExponentialDecayWithinFirstOrderError) {
  Matrix p(1, 0);
  for (double dt : {1e-2, 1e-3}) {
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    const auto d = physics_only_rollout(decay(), config(dt, steps, 0), p, 1);
    // global error of explicit Euler on x' = -x is about t e^{-t} dt / 2
    EXPECT_NEAR(d.at(0, 0, steps, 0), std::exp(-1.0), dt);
  }
}

TEST(PhysicsOnlyRollout, ZeroDiffusionReplicationsIdentical) {
  Matrix p(1, 2);
  p << 0.05, 0.0;
  const auto d = physics_only_rollout(gbm(), config(1e-3, 30, 4), p, 3);
  for (std::size_t t = 0; t <= 30; ++t) {
    EXPECT_EQ(d.at(0, 0, t, 0), d.at(0, 1, t, 0));
    EXPECT_EQ(d.at(0, 0, t, 0), d.at(0, 2, t, 0));
  }
}

TEST(PhysicsOnlyRollout, GbmWeakErrorShrinksWithDt) {
  // E[S_t] under Euler is (1 + x1 dt)^n exactly; its gap to e^{x1 t} shrinks linearly in dt.
  const double x1 = 0.05, t = 0.1;
  double prev = 1.0;
  for (double dt : {1e-2, 1e-3}) {
    const double n = t / dt;
    const double gap = std::abs(std::pow(1.0 + x1 * dt, n) - std::exp(x1 * t));
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  Matrix p(1, 2);
  p << x1, 0.2;
  const std::size_t m = 100000;
  for (double dt : {1e-2, 1e-3}) {
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    const auto d = physics_only_rollout(gbm(), config(dt, steps, 11), p, m);
    double s1 = 0, s2 = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = d.at(0, j, steps, 0);
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / m, var = (s2 - s1 * s1 / m) / (m - 1);
    const double exact_mean = std::exp(x1 * t);
    const double exact_var = std::exp(2 * x1 * t) * (std::exp(0.04 * t) - 1.0);
    EXPECT_NEAR(mean, exact_mean, 3.0 * std::sqrt(exact_var / m));
    EXPECT_NEAR(var, exact_var, 0.05 * exact_var);
  }
}

TEST(PhysicsOnlyRollout, NoiseCouplingIsAdditive) {
  // true - known under the same dB equals the ablated terms at that state
  const BenchmarkSpec mou = make_benchmark("modified_ou");
  const SdeModel& known = mou.known_model(Regime::kDrift);
  const std::vector<double> s = {1.3}, p = {1.5, 0.4}, dB = {0.02};
  const double dt = 1e-3;
  const double diff = euler_maruyama_step(mou.true_model, s, p, 0.0, dt, dB)[0] -
                      euler_maruyama_step(known, s, p, 0.0, dt, dB)[0];
  const double f_uk = (p[0] - s[0]) - 1.0;
  EXPECT_NEAR(diff, f_uk * dt, 1e-15);
}

TEST(SdeModel, DualJacobianMatchesFiniteDifference) {
  const BenchmarkSpec d = make_benchmark("duffing_vdp");
  const SdeModel& m = d.true_model;
  const double x[2] = {0.7, -0.3}, p[2] = {0.3, 20.0};
  double jac[4];
  m.drift_jacobian(x, p, 0.0, jac);
  for (int c = 0; c < 2; ++c) {
    const double h = 1e-6;
    double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
    xp[c] += h;
    xm[c] -= h;
    double fp[2], fm[2];
    m.drift(xp, p, 0.0, fp);
    m.drift(xm, p, 0.0, fm);
    for (int r = 0; r < 2; ++r) EXPECT_NEAR(jac[r * 2 + c], (fp[r] - fm[r]) / (2 * h), 1e-5);
  }
}

TEST(SimConfig, Validation) {
  SimConfig c = config(0.0, 10, 0);
  Matrix p(1, 0);
  EXPECT_THROW(physics_only_rollout(decay(), c, p, 1), ContractError);
  c = config(0.1, 0, 0);
  EXPECT_THROW(physics_only_rollout(decay(), c, p, 1), ContractError);
  c = config(0.1, 5, 0);
  EXPECT_THROW(physics_only_rollout(decay(), c, p, 0), ContractError);
}
