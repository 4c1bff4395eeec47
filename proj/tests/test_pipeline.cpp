#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dpc/pipeline.hpp"

using namespace dpc;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(const std::string& name) {
  RunConfig c = default_config("black_scholes", Regime::kDrift);
  c.data.n_samples = 4;
  c.data.n_replications = 4;
  c.data.n_steps = 5;
  c.train.epochs = 2;
  c.train.batch_size = 2;
  c.train.hidden = {6};
  c.train.plateau_window = 0;
  c.train.checkpoint_every = 1;
  c.eval.n_times = 3;
  c.eval.n_test_points = 2;
  c.eval.mc_paths = 200;
  c.eval.model_paths = 200;
  c.eval.grid_points = 64;
  c.output_dir = (fs::temp_directory_path() / "dpc_test_pipeline" / name).string();
  fs::remove_all(c.output_dir);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST(Pipeline, EvalStepsSpanTwiceTheTrainingWindow) {
  const auto s = eval_steps(100, 20, 2.0);
  ASSERT_EQ(s.size(), 20u);
  EXPECT_EQ(s.front(), 1u);
  EXPECT_EQ(s.back(), 200u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(eval_steps(100, 1, 2.0), std::vector<std::size_t>{200});
  EXPECT_THROW(eval_steps(100, 0, 2.0), ContractError);
}

TEST(Pipeline, ReproduceWritesAllArtifacts) {
  const RunConfig c = tiny("reproduce");
  const EvaluationResult r = cmd_reproduce(c);
  ASSERT_EQ(r.reports.size(), 3u);
  EXPECT_EQ(r.reports[0].method, "dpc");
  EXPECT_EQ(r.reports[1].method, "data_only");
  EXPECT_EQ(r.reports[2].method, "physics_only");
  for (const auto& m : r.reports) {
    EXPECT_GE(m.epsilon, 0.0);
    EXPECT_LE(m.epsilon, 1.0);
  }
  const RunPaths p{c.output_dir};
  for (const fs::path& f : {p.dataset(), p.checkpoint("dpc"), p.checkpoint("data_only"), p.table1(),
                            p.hellinger(), p.report(), p.manifest(), p.train_log("dpc")})
    EXPECT_TRUE(fs::exists(f)) << f;
  EXPECT_EQ(slurp(p.table1()).substr(0, 66),
            "method,black_scholes_drift_epsilon,black_scholes_drift_epsilon_sum");
  const auto manifest = nlohmann::json::parse(slurp(p.manifest()));
  EXPECT_EQ(manifest.at("config_hash"), config_hash(c));
  EXPECT_EQ(r.pdfs.size(), 3u);
}

TEST(Pipeline, SameConfigSameTable) {
  const RunConfig a = tiny("det_a");
  RunConfig b = a;
  b.output_dir = tiny("det_b").output_dir;
  cmd_reproduce(a);
  cmd_reproduce(b);
  EXPECT_EQ(file_hash(RunPaths{a.output_dir}.table1()), file_hash(RunPaths{b.output_dir}.table1()));
  EXPECT_EQ(file_hash(RunPaths{a.output_dir}.dataset()), file_hash(RunPaths{b.output_dir}.dataset()));
}

TEST(Pipeline, ResumeContinuesTheCheckpoint) {
  RunConfig c = tiny("resume");
  cmd_generate(c);
  cmd_train(c);
  c.train.epochs = 4;
  cmd_train(c, true);
  const Checkpoint ck = load_checkpoint(RunPaths{c.output_dir}.checkpoint("dpc"));
  EXPECT_EQ(ck.state.epoch, 4);
  EXPECT_EQ(ck.state.history.size(), 4u);
}

TEST(Pipeline, ResumeRefusesAnotherBenchmark) {
  RunConfig c = tiny("mismatch");
  cmd_generate(c);
  cmd_train(c);
  RunConfig other = c;
  other.regime = Regime::kDiffusion;
  EXPECT_THROW(cmd_train(other, true), ConfigError);
  other = c;
  other.benchmark = "modified_ou";
  EXPECT_THROW(cmd_train(other, true), ConfigError);
}

TEST(Pipeline, EvaluateWithoutCheckpointIsAnIoError) {
  const RunConfig c = tiny("no_checkpoint");
  cmd_generate(c);
  EXPECT_THROW(cmd_evaluate(c), IoError);
  EXPECT_THROW(cmd_train(tiny("no_dataset")), IoError);
}

TEST(Pipeline, DatasetHeadKeepsTheFirstSamples) {
  const RunConfig c = tiny("head");
  const TrajectoryDataset d = cmd_generate(c);
  const TrajectoryDataset h = dataset_head(d, 2);
  EXPECT_EQ(h.n_samples, 2u);
  EXPECT_EQ(h.params, d.params.topRows(2));
  EXPECT_EQ(h.at(1, 3, 5, 0), d.at(1, 3, 5, 0));
  EXPECT_THROW(dataset_head(d, 5), ContractError);
}
