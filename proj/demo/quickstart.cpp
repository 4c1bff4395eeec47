// Corrects the drift of Black-Scholes with a small network and compares the predicted
// distribution of S(0.2) against ground truth and the uncorrected physics.

#include <cstdio>

#include "dpc/all.hpp"

int main() {
  using namespace dpc;
  const BenchmarkSpec spec = make_benchmark("black_scholes");
  const Regime regime = Regime::kDrift;

  TrajectoryDataset data = simulate_ensemble(spec.true_model, spec.sim_config(1), spec.param_sampler(), 20, 20);

  DpcOptions opt;
  opt.hidden = {64, 64};
  opt.zero_heads = true;
  TrainState state = start_training(make_dpc_model(spec, regime, data, opt));

  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 2;
  tc.lr = {1e-3, 1.0, 1};
  tc.seed = 2;
  train(state, data, tc, [](const TrainState&, const EpochRecord& r) {
    std::printf("epoch %3d  loss %.4f\n", r.epoch, r.loss);
    return true;
  });

  EvalSettings es;
  es.n_times = 5;
  es.n_test_points = 2;
  es.mc_paths = 5000;
  es.model_paths = 5000;
  const EvaluationResult r = evaluate_methods(spec, regime, &state.model, nullptr, es);
  for (const MethodReport& m : r.reports) std::printf("%-13s epsilon %.4f\n", m.method.c_str(), m.epsilon);

  const Vector xi = r.test_points.row(0).transpose();
  const auto q = predict_pdf(state.model, xi, spec.initial_condition(xi), 0.2, 2000, 9);
  std::printf("S(0.2) at xi = (%.3f, %.3f): mean %.4f sd %.4f\n", xi[0], xi[1], sample_mean(q), sample_std(q));
}
