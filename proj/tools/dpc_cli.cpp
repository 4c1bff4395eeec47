// Command-line front end: generate | train | evaluate | reproduce | convergence.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dpc/all.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string benchmark;
  std::string regime;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool dry_run = false;
  bool resume = false;
  bool csv = false;
  bool quiet = false;
};

dpc::RunConfig resolve(const Options& o) {
  dpc::RunConfig c;
  bool out_from_file = false;
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw dpc::IoError("cannot open config '" + o.config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw dpc::ConfigError("config '" + o.config_path + "' is not valid JSON: " + e.what());
    }
    out_from_file = j.contains("output_dir");
    if (!o.benchmark.empty()) j["benchmark"] = o.benchmark;
    if (!o.regime.empty()) j["regime"] = o.regime;
    c = dpc::config_from_json(j);
  } else {
    c = dpc::default_config(o.benchmark.empty() ? "black_scholes" : o.benchmark,
                            dpc::parse_regime(o.regime.empty() ? "drift" : o.regime));
  }
  if (o.seed) {
    c.data.seed = *o.seed;
    c.train.seed = *o.seed + 1;
    c.eval.seed = *o.seed + 2;
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  const std::string run = c.benchmark + "_" + dpc::regime_name(c.regime);
  if (!o.out.empty()) {
    c.output_dir = o.out;
  } else if (!out_from_file) {
    const char* root = std::getenv("DPC_OUT_ROOT");
    c.output_dir = (std::filesystem::path(root && *root ? root : "runs") / run).string();
  }
  dpc::validate(c);
  return c;
}

void print_report(const dpc::EvaluationResult& r) {
  for (const auto& m : r.reports)
    std::cout << m.method << " epsilon=" << m.epsilon << " epsilon_sum=" << m.epsilon_sum << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep physics corrector: data generation, training and evaluation"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run configuration (JSON)");
    sub->add_option("--benchmark", o.benchmark, "black_scholes | modified_ou | sir | duffing_vdp");
    sub->add_option("--regime", o.regime, "drift | diffusion | both");
    sub->add_option("--out", o.out, "Output directory (default $DPC_OUT_ROOT/<benchmark>_<regime>)");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; },
                                            "Base seed: data = N, training = N+1, evaluation = N+2");
    sub->add_option_function<int>("--epochs", [&](const int& e) { o.epochs = e; }, "Override the epoch count");
    sub->add_flag("--dry-run", o.dry_run, "Print the resolved configuration and exit");
    sub->add_flag("--quiet", o.quiet, "No per-epoch progress");
  };
  CLI::App* gen = app.add_subcommand("generate", "Simulate the training dataset");
  add_common(gen);
  gen->add_flag("--csv", o.csv, "Also export the dataset as CSV");
  CLI::App* tr = app.add_subcommand("train", "Train the corrector and the data-only baseline");
  add_common(tr);
  tr->add_flag("--resume", o.resume, "Continue from existing checkpoints");
  CLI::App* ev = app.add_subcommand("evaluate", "Compare methods against Monte Carlo ground truth");
  add_common(ev);
  CLI::App* rep = app.add_subcommand("reproduce", "generate + train + evaluate");
  add_common(rep);
  CLI::App* conv = app.add_subcommand("convergence", "Error against training-set size");
  add_common(conv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(dpc::ErrorCategory::kConfig);
  }

  try {
    const dpc::RunConfig c = resolve(o);
    if (o.dry_run) {
      std::cout << dpc::to_json(c).dump(2) << '\n';
      return 0;
    }
    dpc::EpochCallback progress;
    if (!o.quiet)
      progress = [](const std::string& method, const dpc::EpochRecord& r) {
        std::cerr << method << " epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr << " ("
                  << r.wall_seconds << " s)\n";
      };
    if (*gen) {
      const auto d = dpc::cmd_generate(c, o.csv);
      std::cout << "wrote " << dpc::RunPaths{c.output_dir}.dataset().string() << " (" << d.n_samples << " x "
                << d.n_replications << " x " << d.n_steps + 1 << ")\n";
    } else if (*tr) {
      dpc::cmd_train(c, o.resume, progress);
    } else if (*ev) {
      print_report(dpc::cmd_evaluate(c));
    } else if (*rep) {
      print_report(dpc::cmd_reproduce(c, progress));
    } else if (*conv) {
      for (const auto& p : dpc::cmd_convergence(c, progress))
        std::cout << "N=" << p.n_samples << " epsilon=" << p.epsilon << " epsilon_n=" << p.epsilon_n << '\n';
    }
  } catch (const dpc::Error& e) {
    std::cerr << "error[" << dpc::category_name(e.category()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return static_cast<int>(dpc::ErrorCategory::kInternal);
  }
  return 0;
}
