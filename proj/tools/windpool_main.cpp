#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "windpool/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 usage/config error, 2 numerical/consistency failure.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const windpool::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const windpool::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::string method;
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  int max_epochs = 0;
  int patience = 0;

  // Flags override config-file fields.
  windpool::RunConfig resolve() const {
    windpool::RunConfig c = windpool::load_run_config(config_path);
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!method.empty()) c.method = method;
    if (!checkpoint.empty()) c.checkpoint_path = checkpoint;
    if (seed_set) {
      c.seed = seed;
    }
    if (threads > 0) c.threads = threads;
    if (max_epochs > 0) c.training.max_epochs = max_epochs;
    if (patience > 0) c.training.patience = patience;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"windpool: pooled probabilistic wind-power forecasting, cooperative offering and settlement"};
  app.require_subcommand(1);

  // generate
  std::string gen_spec, gen_out;
  auto* generate = app.add_subcommand("generate", "Generate a seeded synthetic dataset");
  generate->add_option("--spec", gen_spec, "Synthetic spec JSON")->required();
  generate->add_option("--out", gen_out, "Output directory")->required();

  auto add_common = [](CLI::App* cmd, CommonFlags& flags, bool training_knobs) {
    cmd->add_option("--config", flags.config_path, "Run config JSON")->required();
    cmd->add_option("--out", flags.output_dir, "Output directory (overrides config)");
    cmd->add_option("--method", flags.method, "Method (overrides config)");
    cmd->add_option("--checkpoint", flags.checkpoint, "Reconciler checkpoint path");
    cmd->add_option("--seed", flags.seed, "Seed (overrides config)")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    if (training_knobs) {
      cmd->add_option("--max-epochs", flags.max_epochs, "Training epoch cap");
      cmd->add_option("--patience", flags.patience, "Early stopping patience");
    }
    cmd->add_option("--threads", flags.threads, "Worker threads for hour-level parallelism");
  };

  CommonFlags train_flags, run_flags;
  auto* train = app.add_subcommand("train", "Train a projection or nonparametric reconciler");
  add_common(train, train_flags, true);
  auto* run = app.add_subcommand("run", "Reconcile, offer, settle and evaluate on the test split");
  add_common(run, run_flags, false);

  std::vector<std::string> report_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Compare finished runs");
  report->add_option("runs", report_dirs, "Run directories")->required()->expected(-1);
  report->add_option("--out", report_out, "Report output directory")->required();

  std::string audit_dir;
  auto* audit = app.add_subcommand("audit", "Re-run the coalition audit on a saved run");
  audit->add_option("run", audit_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (generate->parsed()) {
    return guarded([&] { return windpool::cmd_generate(gen_spec, gen_out); });
  }
  if (train->parsed()) {
    return guarded([&] { return windpool::cmd_train(train_flags.resolve()); });
  }
  if (run->parsed()) {
    return guarded([&] { return windpool::cmd_run(run_flags.resolve()); });
  }
  if (report->parsed()) {
    return guarded([&] { return windpool::cmd_report(report_dirs, report_out); });
  }
  if (audit->parsed()) {
    return guarded([&] { return windpool::cmd_audit(audit_dir); });
  }
  return 1;
}
