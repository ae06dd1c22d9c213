#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "windpool/data.hpp"
#include "windpool/market.hpp"

using namespace windpool;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("WINDPOOL_CLI");
  REQUIRE_MESSAGE(env != nullptr, "WINDPOOL_CLI must point at the built binary");
  return env;
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path work_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "windpool_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), ("missing file " + path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSynthSpec = R"({
  "m": 2,
  "n_scenarios": 6,
  "n_days": 20,
  "bias_fraction": 0.1,
  "dispersion_shrink": 0.6,
  "seed": 5
})";

std::string run_config(const fs::path& dir, const std::string& method,
                       const std::string& out_name) {
  std::string cfg = R"({
  "dataset": {"manifest": "data/manifest.json"},
  "method": ")" + method + R"(",
  "prices": {"pi_f": 25, "psi_plus": 4, "psi_minus": 12},
  "seed": 9,
  "output_dir": ")" + out_name + R"("
})";
  const fs::path path = dir / (method + "_config.json");
  write_file(path, cfg);
  return path.string();
}

}  // namespace

TEST_CASE("generate is deterministic and validates its spec") {
  const fs::path dir = work_dir("generate");
  write_file(dir / "spec.json", kSynthSpec);

  REQUIRE(run_cli("generate --spec " + (dir / "spec.json").string() + " --out " +
                  (dir / "a").string()) == 0);
  REQUIRE(run_cli("generate --spec " + (dir / "spec.json").string() + " --out " +
                  (dir / "b").string()) == 0);
  for (const char* name : {"forecasts.csv", "observations.csv", "manifest.json"}) {
    CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));
  }

  write_file(dir / "bad.json", R"({"m": 2, "n_scenarios": 6, "n_days": 5, "dispersion_shrink": 0})");
  CHECK(run_cli("generate --spec " + (dir / "bad.json").string() + " --out " +
                (dir / "c").string()) == 1);
}

TEST_CASE("full pipeline: generate, run, audit, report") {
  const fs::path dir = work_dir("pipeline");
  write_file(dir / "spec.json", kSynthSpec);
  REQUIRE(run_cli("generate --spec " + (dir / "spec.json").string() + " --out " +
                  (dir / "data").string()) == 0);

  const std::string bu_cfg = run_config(dir, "bottom_up", (dir / "run_bu").string());
  REQUIRE(run_cli("run --config " + bu_cfg) == 0);
  for (const char* name : {"offers.csv", "duals.csv", "reconciled.csv", "allocations.csv",
                           "ranks.csv", "histogram.csv", "metrics.json", "core_audit.json",
                           "run_manifest.json"}) {
    CHECK(fs::exists(dir / "run_bu" / name));
  }
  CHECK(read_file(dir / "run_bu" / "core_audit.json").find("\"all_hours_in_core\": true") !=
        std::string::npos);

  const std::string ind_cfg = run_config(dir, "independent", (dir / "run_ind").string());
  REQUIRE(run_cli("run --config " + ind_cfg) == 0);
  CHECK_FALSE(fs::exists(dir / "run_ind" / "allocations.csv"));

  SUBCASE("independent offers match the per-producer quantile rule") {
    DatasetManifest manifest = load_manifest((dir / "data" / "manifest.json").string());
    ScenarioPanel panel = load_panel(manifest);
    auto [train, test] = chronological_split(panel, manifest.split_fraction);

    std::ifstream offers(dir / "run_ind" / "offers.csv");
    std::string line;
    std::getline(offers, line);  // header
    REQUIRE(std::getline(offers, line));
    std::istringstream row(line);
    std::string tok;
    std::getline(row, tok, ',');
    const std::int64_t issuance = std::stoll(tok);
    std::getline(row, tok, ',');
    const int lead = std::stoi(tok);
    std::getline(row, tok, ',');
    const double offer = std::stod(tok);

    int t = -1, k = -1;
    for (int i = 0; i < test.n_issuance(); ++i) {
      if (test.issuance_times[i] == issuance) t = i;
    }
    for (int i = 0; i < test.n_leads(); ++i) {
      if (test.lead_times[i] == lead) k = i;
    }
    REQUIRE(t >= 0);
    REQUIRE(k >= 0);
    std::vector<double> own(test.n_scenarios);
    for (int xi = 0; xi < test.n_scenarios; ++xi) own[xi] = test.value(t, k, xi, 1);
    CHECK(offer == doctest::Approx(quantile_offer(own, {25.0, 4.0, 12.0})).epsilon(1e-12));
  }

  SUBCASE("rerun is byte-identical, independent of thread count") {
    const std::string cfg2 = run_config(dir, "bottom_up", (dir / "run_bu2").string());
    REQUIRE(run_cli("run --config " + cfg2 + " --threads 4") == 0);
    for (const char* name :
         {"offers.csv", "allocations.csv", "ranks.csv", "histogram.csv", "metrics.json"}) {
      CHECK(read_file(dir / "run_bu" / name) == read_file(dir / "run_bu2" / name));
    }
  }

  SUBCASE("audit re-checks a saved run") {
    CHECK(run_cli("audit " + (dir / "run_bu").string()) == 0);
  }

  SUBCASE("report compares runs") {
    REQUIRE(run_cli("report " + (dir / "run_ind").string() + " " + (dir / "run_bu").string() +
                    " --out " + (dir / "report").string()) == 0);
    const std::string profits = read_file(dir / "report" / "profits_comparison.csv");
    CHECK(profits.find("producer,independent,bottom_up") == 0);
    CHECK(profits.find("wpp1") != std::string::npos);
    CHECK(profits.find("wpp2") != std::string::npos);
    CHECK(fs::exists(dir / "report" / "metrics_comparison.csv"));
    CHECK(fs::exists(dir / "report" / "profits_comparison.txt"));
    CHECK(fs::exists(dir / "report" / "histogram_bottom_up.csv"));
  }

  SUBCASE("report on a missing directory fails with exit 1") {
    CHECK(run_cli("report " + (dir / "nope").string() + " --out " + (dir / "r2").string()) == 1);
  }
}

TEST_CASE("train rejects untrainable methods and run demands checkpoints") {
  const fs::path dir = work_dir("train_errors");
  write_file(dir / "spec.json", kSynthSpec);
  REQUIRE(run_cli("generate --spec " + (dir / "spec.json").string() + " --out " +
                  (dir / "data").string()) == 0);

  const std::string bu_cfg = run_config(dir, "bottom_up", (dir / "t1").string());
  CHECK(run_cli("train --config " + bu_cfg) == 1);
  const std::string ind_cfg = run_config(dir, "independent", (dir / "t2").string());
  CHECK(run_cli("train --config " + ind_cfg) == 1);

  // run without checkpoint
  const std::string proj_cfg = run_config(dir, "projection", (dir / "t3").string());
  CHECK(run_cli("run --config " + proj_cfg) == 1);

  // usage error
  CHECK(run_cli("run") == 1);
  CHECK(run_cli("definitely-not-a-command") == 1);
}

TEST_CASE("train then run round-trips a checkpoint") {
  const fs::path dir = work_dir("train_run");
  write_file(dir / "spec.json", kSynthSpec);
  REQUIRE(run_cli("generate --spec " + (dir / "spec.json").string() + " --out " +
                  (dir / "data").string()) == 0);

  std::string cfg = std::string(R"({
  "dataset": {"manifest": "data/manifest.json"},
  "method": "projection",
  "prices": {"pi_f": 25, "psi_plus": 4, "psi_minus": 12},
  "training": {"max_epochs": 10, "patience": 5},
  "seed": 9,
  "output_dir": "train_out"
})");
  write_file(dir / "train.json", cfg);
  REQUIRE(run_cli("train --config " + (dir / "train.json").string()) == 0);
  CHECK(fs::exists(dir / "train_out" / "projection_checkpoint.json"));
  CHECK(fs::exists(dir / "train_out" / "training_report.json"));

  std::string run_cfg = std::string(R"({
  "dataset": {"manifest": "data/manifest.json"},
  "method": "projection",
  "prices": {"pi_f": 25, "psi_plus": 4, "psi_minus": 12},
  "seed": 9,
  "output_dir": "run_proj",
  "checkpoint": "train_out/projection_checkpoint.json"
})");
  write_file(dir / "run.json", run_cfg);
  REQUIRE(run_cli("run --config " + (dir / "run.json").string()) == 0);
  CHECK(fs::exists(dir / "run_proj" / "metrics.json"));
}
