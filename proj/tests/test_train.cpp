#include <gtest/gtest.h>

#include <cmath>

#include "dpc/benchmarks.hpp"
#include "dpc/train.hpp"

using namespace dpc;

namespace {

struct Fixture {
  BenchmarkSpec spec = make_benchmark("black_scholes", {{"n_steps", 8.0}});
  TrajectoryDataset data =
      simulate_ensemble(spec.true_model, spec.sim_config(21), spec.param_sampler(), 6, 5);

  DpcModel model(bool zero_heads = true) const {
    DpcOptions o;
    o.hidden = {8, 8};
    o.init_seed = 3;
    o.zero_heads = zero_heads;
    return make_dpc_model(spec, Regime::kDrift, data, o);
  }
};

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 3;
  c.lr = {1e-3, 1.0, 1};
  c.seed = 17;
  c.plateau_window = 0;
  return c;
}

}  // namespace

TEST(Train, BatchSizeBelowTwoIsRejected) {
  Fixture f;
  TrainState s = start_training(f.model());
  TrainConfig c = quick(1);
  c.batch_size = 1;
  EXPECT_THROW(train(s, f.data, c), ContractError);
}

TEST(Train, MismatchedDatasetIsRejected) {
  Fixture f;
  TrainState s = start_training(f.model());
  const BenchmarkSpec sir = make_benchmark("sir", {{"n_steps", 8.0}});
  const TrajectoryDataset other =
      simulate_ensemble(sir.true_model, sir.sim_config(1), sir.param_sampler(), 3, 2);
  EXPECT_THROW(train(s, other, quick(1)), DimensionError);
}

TEST(Train, BatchLossIsFiniteAndGradientsAligned) {
  Fixture f;
  DpcModel m = f.model(false);
  const BatchResult r = batch_loss(m, f.data, {0, 1, 2}, 5, 0);
  EXPECT_TRUE(std::isfinite(r.loss));
  const auto params = m.trainable();
  ASSERT_EQ(r.grads.size(), params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    EXPECT_EQ(r.grads[k].rows(), params[k]->rows());
    EXPECT_EQ(r.grads[k].cols(), params[k]->cols());
  }
  const BatchResult no_grad = batch_loss(m, f.data, {0, 1, 2}, 5, 0, false);
  EXPECT_EQ(no_grad.loss, r.loss);
  EXPECT_TRUE(no_grad.grads.empty());
}

TEST(Train, ZeroHeadsStillReceiveGradient) {
  Fixture f;
  DpcModel m = f.model(true);
  const BatchResult r = batch_loss(m, f.data, {0, 1, 2}, 5, 0);
  const std::size_t last_w = r.grads.size() - 5;
  EXPECT_GT(r.grads[last_w].norm(), 0.0);
}

TEST(Train, SameSeedSameParameters) {
  Fixture f;
  TrainState a = start_training(f.model()), b = start_training(f.model());
  train(a, f.data, quick(3));
  train(b, f.data, quick(3));
  EXPECT_EQ(a.model.net.weights, b.model.net.weights);
  EXPECT_EQ(a.model.log_lambda, b.model.log_lambda);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.history[k].loss, b.history[k].loss);
}

TEST(Train, ResumingEqualsTrainingStraightThrough) {
  Fixture f;
  TrainState straight = start_training(f.model());
  train(straight, f.data, quick(4));
  TrainState split = start_training(f.model());
  train(split, f.data, quick(2));
  EXPECT_EQ(split.epoch, 2);
  train(split, f.data, quick(4));
  EXPECT_EQ(split.epoch, 4);
  EXPECT_EQ(straight.model.net.weights, split.model.net.weights);
  EXPECT_EQ(straight.adam.step, split.adam.step);
}

TEST(Train, CallbackCanStopEarly) {
  Fixture f;
  TrainState s = start_training(f.model());
  int seen = 0;
  train(s, f.data, quick(10), [&](const TrainState&, const EpochRecord&) { return ++seen < 2; });
  EXPECT_EQ(seen, 2);
  EXPECT_EQ(s.epoch, 2);
}

TEST(Train, FrozenHyperparametersStayPut) {
  Fixture f;
  TrainState s = start_training(f.model());
  TrainConfig c = quick(2);
  c.learn_hyperparameters = false;
  const double before = s.model.log_lambda(0, 0);
  train(s, f.data, c);
  EXPECT_EQ(s.model.log_lambda(0, 0), before);
  EXPECT_NEAR(s.history.back().lambda, 0.01, 1e-15);
}

TEST(Train, ShuffleIsAPermutation) {
  const auto order = detail::epoch_order(13, 4, 2);
  std::vector<int> seen(13, 0);
  for (std::size_t i : order) ++seen[i];
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_NE(detail::epoch_order(13, 4, 2), detail::epoch_order(13, 4, 3));
}
