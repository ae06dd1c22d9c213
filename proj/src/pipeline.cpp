#include "windpool/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"
#include "windpool/allocation.hpp"
#include "windpool/scoring.hpp"

namespace fs = std::filesystem;

namespace windpool {

void RunConfig::validate() const {
  const bool has_manifest = !manifest_path.empty();
  const bool has_synthetic = !synthetic_spec_path.empty();
  if (has_manifest == has_synthetic) {
    throw ConfigError("config needs exactly one of 'manifest' or 'synthetic'");
  }
  if (method != "independent" && method != "bottom_up" && method != "projection" &&
      method != "nonparametric") {
    throw ConfigError("unknown method '" + method + "'");
  }
  prices.validate();
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ConfigError("split_fraction must lie in (0, 1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (output_dir.empty()) throw ConfigError("config needs an output directory");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }

  RunConfig c;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string p) {
    if (!p.empty() && fs::path(p).is_relative()) return (base / p).string();
    return p;
  };
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.contains("manifest")) c.manifest_path = resolve(d.at("manifest").get<std::string>());
    if (d.contains("synthetic")) c.synthetic_spec_path = resolve(d.at("synthetic").get<std::string>());
  }
  if (j.contains("method")) c.method = j.at("method").get<std::string>();
  if (j.contains("prices")) {
    const auto& p = j.at("prices");
    c.prices.pi_f = p.at("pi_f").get<double>();
    c.prices.psi_plus = p.at("psi_plus").get<double>();
    c.prices.psi_minus = p.at("psi_minus").get<double>();
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    if (t.contains("max_epochs")) c.training.max_epochs = t.at("max_epochs").get<int>();
    if (t.contains("patience")) c.training.patience = t.at("patience").get<int>();
    if (t.contains("learning_rate")) c.training.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("clip_norm")) c.training.clip_norm = t.at("clip_norm").get<double>();
    if (t.contains("hidden_width_factor")) {
      c.training.hidden_width_factor = t.at("hidden_width_factor").get<int>();
    }
    if (t.contains("hidden_layers")) c.training.hidden_layers = t.at("hidden_layers").get<int>();
  }
  if (j.contains("split_fraction")) c.split_fraction = j.at("split_fraction").get<double>();
  if (j.contains("validation_fraction")) {
    c.validation_fraction = j.at("validation_fraction").get<double>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
  if (j.contains("checkpoint")) c.checkpoint_path = resolve(j.at("checkpoint").get<std::string>());
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  return c;
}

std::pair<ScenarioPanel, Hierarchy> load_dataset(const RunConfig& config) {
  if (!config.synthetic_spec_path.empty()) {
    SyntheticSpec spec = synthetic_spec_from_json_file(config.synthetic_spec_path);
    auto [panel, sampler] = generate_synthetic(spec);
    return {std::move(panel), spec.hierarchy()};
  }
  DatasetManifest manifest = load_manifest(config.manifest_path);
  return {load_panel(manifest), manifest.hierarchy()};
}

namespace {

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  nlohmann::json dataset;
  if (!c.manifest_path.empty()) dataset["manifest"] = c.manifest_path;
  if (!c.synthetic_spec_path.empty()) dataset["synthetic"] = c.synthetic_spec_path;
  j["dataset"] = dataset;
  j["method"] = c.method;
  j["prices"] = {{"pi_f", c.prices.pi_f},
                 {"psi_plus", c.prices.psi_plus},
                 {"psi_minus", c.prices.psi_minus}};
  j["training"] = {{"max_epochs", c.training.max_epochs},
                   {"patience", c.training.patience},
                   {"learning_rate", c.training.learning_rate},
                   {"beta1", c.training.beta1},
                   {"beta2", c.training.beta2},
                   {"epsilon", c.training.epsilon},
                   {"clip_norm", c.training.clip_norm},
                   {"hidden_width_factor", c.training.hidden_width_factor},
                   {"hidden_layers", c.training.hidden_layers}};
  j["split_fraction"] = c.split_fraction;
  j["validation_fraction"] = c.validation_fraction;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  if (!c.checkpoint_path.empty()) j["checkpoint"] = c.checkpoint_path;
  j["threads"] = c.threads;
  return j;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_run_manifest(const RunConfig& config, const fs::path& dir, const char* command,
                        const Hierarchy& hierarchy, const std::vector<std::string>& series,
                        int n_scenarios) {
  nlohmann::json j;
  j["tool"] = "windpool";
  j["version"] = kVersion;
  j["command"] = command;
  j["config"] = config_to_json(config);
  j["series"] = series;
  j["capacities_mw"] = hierarchy.capacities();
  j["total_capacity_mw"] = hierarchy.total_capacity();
  j["n_scenarios"] = n_scenarios;
  write_json(dir / "run_manifest.json", j);
}

struct SplitPanels {
  ScenarioPanel train;       // training portion of the training period
  ScenarioPanel validation;  // tail of the training period
  ScenarioPanel test;
};

SplitPanels split_for_run(const ScenarioPanel& panel, const RunConfig& config) {
  auto [train_all, test] = chronological_split(panel, config.split_fraction);
  auto [train, validation] = chronological_split(train_all, 1.0 - config.validation_fraction);
  return {std::move(train), std::move(validation), std::move(test)};
}

Reconciler reconciler_for_run(const RunConfig& config, const Hierarchy& hierarchy) {
  if (config.method == "bottom_up") return Reconciler::bottom_up(hierarchy);
  if (!config.needs_checkpoint()) throw ConfigError("no reconciler for method " + config.method);
  if (config.checkpoint_path.empty()) {
    throw ConfigError("method " + config.method + " needs a checkpoint (run `windpool train` first)");
  }
  Reconciler r = Reconciler::load(config.checkpoint_path);
  if (to_string(r.kind()) != config.method) {
    throw ConfigError("checkpoint holds a " + to_string(r.kind()) + " reconciler but method is " +
                      config.method);
  }
  if (r.hierarchy().fingerprint() != hierarchy.fingerprint()) {
    throw ConfigError("checkpoint hierarchy does not match the dataset");
  }
  return r;
}

struct HourOutput {
  // Cooperative solve (empty for independent runs).
  double offer = 0.0;
  double expected_cost = 0.0;
  double realized_aggregate_cost = 0.0;
  Eigen::VectorXd duals;
  Eigen::VectorXd allocated;      // a_i
  Eigen::VectorXd realized;       // c_i
  Eigen::VectorXd profit_coop;
  bool core_ok = true;
  double core_worst = 0.0;
  double core_efficiency_gap = 0.0;
  // Per-producer independent baseline (always computed).
  Eigen::VectorXd indep_offer;
  Eigen::VectorXd indep_expected_cost;
  Eigen::VectorXd profit_indep;
  // Forecast-quality metrics on the evaluated panel.
  double energy_score_value = 0.0;
  int rank = 0;
};

}  // namespace

int cmd_generate(const std::string& spec_path, const std::string& out_dir) {
  SyntheticSpec spec = synthetic_spec_from_json_file(spec_path);
  fs::create_directories(out_dir);
  auto [panel, sampler] = generate_synthetic(spec);

  const fs::path dir(out_dir);
  save_panel(panel, (dir / "forecasts.csv").string(), (dir / "observations.csv").string());

  DatasetManifest manifest;
  for (int i = 0; i < spec.m; ++i) {
    manifest.sites.push_back({panel.series[i + 1], spec.effective_capacities()[i]});
  }
  manifest.forecasts_path = "forecasts.csv";
  manifest.observations_path = "observations.csv";
  manifest.n_scenarios = spec.n_scenarios;
  manifest.seed = spec.seed;
  save_manifest(manifest, (dir / "manifest.json").string());

  nlohmann::json meta;
  meta["tool"] = "windpool";
  meta["version"] = kVersion;
  meta["generator"] = {{"m", spec.m},
                       {"n_scenarios", spec.n_scenarios},
                       {"n_days", spec.n_days},
                       {"correlation_length", spec.correlation_length},
                       {"marginal_location", spec.marginal_location},
                       {"marginal_scale", spec.marginal_scale},
                       {"bias_fraction", spec.bias_fraction},
                       {"dispersion_shrink", spec.dispersion_shrink},
                       {"warp_exponent", spec.warp_exponent},
                       {"capacities_mw", spec.effective_capacities()},
                       {"seed", spec.seed}};
  write_json(dir / "synth_meta.json", meta);

  std::cout << "generated " << spec.n_days << " days x 24 leads x " << spec.n_scenarios
            << " scenarios for " << spec.m << " producers in " << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& config) {
  config.validate();
  if (!config.needs_checkpoint()) {
    throw ConfigError("method " + config.method + " has nothing to train");
  }
  auto [panel, hierarchy] = load_dataset(config);
  if (!panel.has_observations()) throw ConfigError("training needs observations in the dataset");
  SplitPanels split = split_for_run(panel, config);

  TrainConfig tc = config.training;
  tc.seed = config.seed;
  auto [reconciler, report] =
      train_reconciler(reconciler_kind_from_string(config.method), split.train, split.validation,
                       hierarchy, tc);

  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);
  const fs::path checkpoint = config.checkpoint_path.empty()
                                  ? dir / (config.method + "_checkpoint.json")
                                  : fs::path(config.checkpoint_path);
  reconciler.save(checkpoint.string());
  report.checkpoint_path = checkpoint.string();

  nlohmann::json rj;
  rj["train_aes_mw"] = report.train_aes;
  rj["validation_aes_mw"] = report.validation_aes;
  rj["selected_epoch"] = report.selected_epoch;
  rj["wall_time_seconds"] = report.wall_time_seconds;
  rj["seed"] = report.seed;
  rj["checkpoint"] = report.checkpoint_path;
  write_json(dir / "training_report.json", rj);
  write_run_manifest(config, dir, "train", hierarchy, panel.series, panel.n_scenarios);

  std::cout << "trained " << config.method << ": selected epoch " << report.selected_epoch
            << ", validation AES " << format_double(report.validation_aes[report.selected_epoch])
            << " MW (initial " << format_double(report.validation_aes[0]) << "), checkpoint "
            << checkpoint.string() << "\n";
  return 0;
}

int cmd_run(const RunConfig& config) {
  config.validate();
  auto [panel, hierarchy] = load_dataset(config);
  if (!panel.has_observations()) throw ConfigError("run needs observations for settlement");
  SplitPanels split = split_for_run(panel, config);
  const ScenarioPanel& base_test = split.test;

  const bool cooperative = config.is_cooperative();
  ScenarioPanel eval_panel = base_test;
  if (cooperative) {
    Reconciler reconciler = reconciler_for_run(config, hierarchy);
    eval_panel = reconciler.apply_panel(base_test);
  }

  const int m = hierarchy.m();
  const int n_leads = base_test.n_leads();
  const long long n_hours = base_test.n_cases();
  const bool audit = cooperative && m <= 12;
  std::vector<HourOutput> hours(static_cast<std::size_t>(n_hours));

  parallel_for(static_cast<std::size_t>(n_hours), config.threads, [&](std::size_t idx) {
    const int t = static_cast<int>(idx) / n_leads;
    const int k = static_cast<int>(idx) % n_leads;
    HourOutput& h = hours[idx];

    const Eigen::VectorXd y = base_test.observation_vector(t, k);
    const Eigen::MatrixXd eval_scen = eval_panel.scenario_matrix(t, k);

    h.energy_score_value = energy_score(eval_scen, y).value;
    Rng rank_rng(mix_seed(config.seed, static_cast<std::uint64_t>(base_test.issuance_times[t]),
                          static_cast<std::uint64_t>(base_test.lead_times[k])));
    h.rank = multivariate_rank(eval_scen, y, rank_rng);

    // Independent baseline from each producer's own base forecasts.
    h.indep_offer.resize(m);
    h.indep_expected_cost.resize(m);
    h.profit_indep.resize(m);
    for (int i = 0; i < m; ++i) {
      std::vector<double> own(base_test.n_scenarios);
      for (int xi = 0; xi < base_test.n_scenarios; ++xi) own[xi] = base_test.value(t, k, xi, i + 1);
      h.indep_offer[i] = quantile_offer(own, config.prices);
      h.indep_expected_cost[i] = expected_imbalance_cost(own, h.indep_offer[i], config.prices);
      h.profit_indep[i] = independent_profit(h.indep_offer[i], y[i + 1], config.prices);
    }

    if (!cooperative) return;

    std::vector<double> aggregate(eval_panel.n_scenarios);
    for (int xi = 0; xi < eval_panel.n_scenarios; ++xi) aggregate[xi] = eval_scen(xi, 0);
    OfferSolution sol;
    try {
      sol = solve_offer(aggregate, config.prices, hierarchy.total_capacity());
    } catch (const NumericalError& e) {
      throw NumericalError("hour issuance=" + std::to_string(base_test.issuance_times[t]) +
                           " lead=" + std::to_string(base_test.lead_times[k]) + ": " + e.what());
    }
    h.offer = sol.offer;
    h.expected_cost = sol.expected_cost;
    h.duals = sol.duals;

    Eigen::MatrixXd bottom = eval_scen.rightCols(m);
    Eigen::VectorXd aggregate_v =
        Eigen::Map<const Eigen::VectorXd>(aggregate.data(), static_cast<Eigen::Index>(aggregate.size()));
    AllocationVector alloc = expected_allocation(bottom, sol.duals, aggregate_v, 1e-6);
    h.allocated = alloc.a;
    h.realized_aggregate_cost = realized_cost(sol.offer, y[0], config.prices);
    h.realized = expost_shares(alloc, h.realized_aggregate_cost);
    h.profit_coop.resize(m);
    for (int i = 0; i < m; ++i) {
      h.profit_coop[i] = cooperative_profit(y[i + 1], h.realized[i], config.prices);
    }
    if (audit) {
      CoreAuditReport core = audit_core(alloc, config.prices, hierarchy.capacities());
      h.core_ok = core.is_core;
      h.core_worst = core.worst_violation;
      h.core_efficiency_gap = core.efficiency_gap;
    }
  });

  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);

  {
    auto out = open_out(dir / "offers.csv");
    out << "issuance_time,lead_time,offer_mw,expected_cost,method,series\n";
    for (long long idx = 0; idx < n_hours; ++idx) {
      const int t = static_cast<int>(idx) / n_leads;
      const int k = static_cast<int>(idx) % n_leads;
      const HourOutput& h = hours[idx];
      if (cooperative) {
        out << base_test.issuance_times[t] << ',' << base_test.lead_times[k] << ','
            << format_double(h.offer) << ',' << format_double(h.expected_cost) << ','
            << config.method << ',' << kAggregateSeriesName << '\n';
      } else {
        for (int i = 0; i < m; ++i) {
          out << base_test.issuance_times[t] << ',' << base_test.lead_times[k] << ','
              << format_double(h.indep_offer[i]) << ',' << format_double(h.indep_expected_cost[i])
              << ',' << config.method << ',' << base_test.series[i + 1] << '\n';
        }
      }
    }
  }

  if (cooperative) {
    {
      auto out = open_out(dir / "duals.csv");
      out << "issuance_time,lead_time,scenario,nu\n";
      for (long long idx = 0; idx < n_hours; ++idx) {
        const int t = static_cast<int>(idx) / n_leads;
        const int k = static_cast<int>(idx) % n_leads;
        for (int xi = 0; xi < eval_panel.n_scenarios; ++xi) {
          out << base_test.issuance_times[t] << ',' << base_test.lead_times[k] << ',' << (xi + 1)
              << ',' << format_double(hours[idx].duals[xi]) << '\n';
        }
      }
    }
    save_panel(eval_panel, (dir / "reconciled.csv").string());
    {
      auto out = open_out(dir / "allocations.csv");
      out << "issuance_time,lead_time,producer,a_i,c_i,profit_coop,profit_indep\n";
      for (long long idx = 0; idx < n_hours; ++idx) {
        const int t = static_cast<int>(idx) / n_leads;
        const int k = static_cast<int>(idx) % n_leads;
        const HourOutput& h = hours[idx];
        for (int i = 0; i < m; ++i) {
          out << base_test.issuance_times[t] << ',' << base_test.lead_times[k] << ','
              << base_test.series[i + 1] << ',' << format_double(h.allocated[i]) << ','
              << format_double(h.realized[i]) << ',' << format_double(h.profit_coop[i]) << ','
              << format_double(h.profit_indep[i]) << '\n';
        }
      }
    }
    {
      nlohmann::json cj;
      cj["audited"] = audit;
      if (audit) {
        bool all_ok = true;
        double worst = -std::numeric_limits<double>::infinity();
        double worst_gap = 0.0;
        nlohmann::json per_hour = nlohmann::json::array();
        for (long long idx = 0; idx < n_hours; ++idx) {
          const int t = static_cast<int>(idx) / n_leads;
          const int k = static_cast<int>(idx) % n_leads;
          const HourOutput& h = hours[idx];
          all_ok = all_ok && h.core_ok;
          worst = std::max(worst, h.core_worst);
          worst_gap = std::max(worst_gap, h.core_efficiency_gap);
          per_hour.push_back({{"issuance_time", base_test.issuance_times[t]},
                              {"lead_time", base_test.lead_times[k]},
                              {"is_core", h.core_ok},
                              {"worst_violation", h.core_worst},
                              {"efficiency_gap", h.core_efficiency_gap}});
        }
        cj["all_hours_in_core"] = all_ok;
        cj["worst_violation"] = worst;
        cj["worst_efficiency_gap"] = worst_gap;
        cj["hours"] = per_hour;
      } else {
        cj["note"] = "exhaustive per-hour audit skipped for m > 12; use `windpool audit`";
      }
      write_json(dir / "core_audit.json", cj);
    }
  }

  std::vector<int> ranks(static_cast<std::size_t>(n_hours));
  {
    auto out = open_out(dir / "ranks.csv");
    out << "case,rank\n";
    for (long long idx = 0; idx < n_hours; ++idx) {
      const int t = static_cast<int>(idx) / n_leads;
      const int k = static_cast<int>(idx) % n_leads;
      ranks[idx] = hours[idx].rank;
      out << base_test.issuance_times[t] << ':' << base_test.lead_times[k] << ','
          << hours[idx].rank << '\n';
    }
  }

  RankHistogram hist = make_rank_histogram(ranks, eval_panel.n_scenarios + 1);
  attach_consistency_band(hist, eval_panel.n_scenarios, 0.95, 1000, config.seed);
  {
    auto out = open_out(dir / "histogram.csv");
    out << "bin,count,lower,upper\n";
    for (int bin = 0; bin < hist.n_bins(); ++bin) {
      out << (bin + 1) << ',' << hist.counts[bin] << ',' << format_double(hist.lower[bin]) << ','
          << format_double(hist.upper[bin]) << '\n';
    }
  }

  double aes = 0.0;
  for (const auto& h : hours) aes += h.energy_score_value;
  aes /= static_cast<double>(n_hours);
  const double aes_base = average_energy_score(base_test);
  const ChiSquareResult chi = chi_square_uniform(hist.counts);

  nlohmann::json metrics;
  metrics["method"] = config.method;
  metrics["seed"] = config.seed;
  metrics["n_test_hours"] = n_hours;
  metrics["aes_mw"] = aes;
  metrics["aes_base_mw"] = aes_base;
  metrics["deviation_from_uniform"] = deviation_from_uniform(hist);
  metrics["rank_uniformity_pvalue"] = chi.p_value;
  nlohmann::json ap, ap_indep;
  for (int i = 0; i < m; ++i) {
    double coop = 0.0, indep = 0.0;
    for (const auto& h : hours) {
      if (cooperative) coop += h.profit_coop[i];
      indep += h.profit_indep[i];
    }
    indep /= static_cast<double>(n_hours);
    ap_indep[base_test.series[i + 1]] = indep;
    if (cooperative) {
      coop /= static_cast<double>(n_hours);
      ap[base_test.series[i + 1]] = coop;
    }
  }
  metrics["average_profit_per_producer"] = cooperative ? ap : ap_indep;
  metrics["average_independent_profit_per_producer"] = ap_indep;
  if (cooperative) {
    double ec = 0.0, rc = 0.0;
    for (const auto& h : hours) {
      ec += h.expected_cost;
      rc += h.realized_aggregate_cost;
    }
    metrics["average_expected_cost"] = ec / static_cast<double>(n_hours);
    metrics["average_realized_cost"] = rc / static_cast<double>(n_hours);
  }
  write_json(dir / "metrics.json", metrics);
  write_run_manifest(config, dir, "run", hierarchy, base_test.series, base_test.n_scenarios);

  std::cout << "run " << config.method << ": " << n_hours << " test hours, AES "
            << format_double(aes) << " MW (base " << format_double(aes_base) << ")\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  struct RunSummary {
    std::string label;
    nlohmann::json metrics;
  };
  std::vector<RunSummary> runs;
  std::map<std::string, int> label_counts;
  for (const auto& dir : run_dirs) {
    const fs::path metrics_path = fs::path(dir) / "metrics.json";
    std::ifstream in(metrics_path);
    if (!in) throw ConfigError("missing run directory or metrics: " + metrics_path.string());
    nlohmann::json metrics;
    try {
      in >> metrics;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(metrics_path.string() + " is not valid JSON: " + e.what());
    }
    std::string label = metrics.at("method").get<std::string>();
    if (++label_counts[label] > 1) label += "_" + std::to_string(label_counts[label]);
    runs.push_back({label, std::move(metrics)});
  }

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  // Producer order from the first run that has profits.
  std::vector<std::string> producers;
  for (const auto& r : runs) {
    for (auto it = r.metrics.at("average_profit_per_producer").begin();
         it != r.metrics.at("average_profit_per_producer").end(); ++it) {
      if (std::find(producers.begin(), producers.end(), it.key()) == producers.end()) {
        producers.push_back(it.key());
      }
    }
  }
  std::sort(producers.begin(), producers.end());

  {
    auto out = open_out(dir / "profits_comparison.csv");
    out << "producer";
    for (const auto& r : runs) out << ',' << r.label;
    out << '\n';
    for (const auto& p : producers) {
      out << p;
      for (const auto& r : runs) {
        const auto& ap = r.metrics.at("average_profit_per_producer");
        out << ',' << (ap.contains(p) ? format_double(ap.at(p).get<double>()) : "");
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "metrics_comparison.csv");
    out << "method,aes_mw,aes_base_mw,deviation_from_uniform,rank_uniformity_pvalue\n";
    for (const auto& r : runs) {
      out << r.label << ',' << format_double(r.metrics.at("aes_mw").get<double>()) << ','
          << format_double(r.metrics.at("aes_base_mw").get<double>()) << ','
          << format_double(r.metrics.at("deviation_from_uniform").get<double>()) << ','
          << format_double(r.metrics.at("rank_uniformity_pvalue").get<double>()) << '\n';
    }
  }
  {
    auto out = open_out(dir / "profits_comparison.txt");
    out << "Average profit per producer ($/hour)\n\n";
    out << std::left << std::setw(20) << "producer";
    for (const auto& r : runs) out << std::right << std::setw(16) << r.label;
    out << '\n';
    for (const auto& p : producers) {
      out << std::left << std::setw(20) << p;
      for (const auto& r : runs) {
        const auto& ap = r.metrics.at("average_profit_per_producer");
        std::ostringstream cell;
        if (ap.contains(p)) cell << std::fixed << std::setprecision(2) << ap.at(p).get<double>();
        out << std::right << std::setw(16) << cell.str();
      }
      out << '\n';
    }
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path src = fs::path(run_dirs[i]) / "histogram.csv";
    if (fs::exists(src)) {
      fs::copy_file(src, dir / ("histogram_" + runs[i].label + ".csv"),
                    fs::copy_options::overwrite_existing);
    }
  }
  std::cout << "report written to " << out_dir << " for " << runs.size() << " runs\n";
  return 0;
}

int cmd_audit(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream manifest_in(dir / "run_manifest.json");
  if (!manifest_in) throw ConfigError("missing run manifest in " + run_dir);
  nlohmann::json manifest;
  manifest_in >> manifest;

  const std::string method = manifest.at("config").at("method").get<std::string>();
  if (method == "independent") {
    throw ConfigError("independent runs have no allocation to audit");
  }
  PriceTriple prices{manifest.at("config").at("prices").at("pi_f").get<double>(),
                     manifest.at("config").at("prices").at("psi_plus").get<double>(),
                     manifest.at("config").at("prices").at("psi_minus").get<double>()};
  std::vector<double> capacities = manifest.at("capacities_mw").get<std::vector<double>>();
  std::vector<std::string> series = manifest.at("series").get<std::vector<std::string>>();
  const int n_scenarios = manifest.at("n_scenarios").get<int>();

  DatasetManifest dm;
  for (std::size_t i = 1; i < series.size(); ++i) {
    dm.sites.push_back({series[i], capacities[i - 1]});
  }
  dm.forecasts_path = (dir / "reconciled.csv").string();
  dm.n_scenarios = n_scenarios;
  ScenarioPanel reconciled = load_panel(dm);

  // duals.csv -> per (issuance, lead) vector
  std::map<std::pair<std::int64_t, int>, Eigen::VectorXd> duals;
  {
    std::ifstream in(dir / "duals.csv");
    if (!in) throw ConfigError("missing duals.csv in " + run_dir);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string tok;
      std::getline(ss, tok, ',');
      const std::int64_t t = parse_int(tok, "duals.csv");
      std::getline(ss, tok, ',');
      const int k = static_cast<int>(parse_int(tok, "duals.csv"));
      std::getline(ss, tok, ',');
      const int xi = static_cast<int>(parse_int(tok, "duals.csv"));
      std::getline(ss, tok, ',');
      auto& v = duals[{t, k}];
      if (v.size() == 0) v = Eigen::VectorXd::Zero(n_scenarios);
      if (xi < 1 || xi > n_scenarios) throw ConfigError("dual scenario index out of range");
      v[xi - 1] = parse_double(tok, "duals.csv");
    }
  }

  bool all_ok = true;
  double worst = -std::numeric_limits<double>::infinity();
  double worst_gap = 0.0;
  nlohmann::json per_hour = nlohmann::json::array();
  const int m = reconciled.n_producers();
  for (int t = 0; t < reconciled.n_issuance(); ++t) {
    for (int k = 0; k < reconciled.n_leads(); ++k) {
      auto it = duals.find({reconciled.issuance_times[t], reconciled.lead_times[k]});
      if (it == duals.end()) {
        throw ConfigError("duals.csv missing hour issuance=" +
                          std::to_string(reconciled.issuance_times[t]) +
                          " lead=" + std::to_string(reconciled.lead_times[k]));
      }
      const Eigen::MatrixXd scen = reconciled.scenario_matrix(t, k);
      AllocationVector alloc =
          expected_allocation(scen.rightCols(m), it->second, scen.col(0), 1e-6);
      CoreAuditReport core = audit_core(alloc, prices, capacities);
      all_ok = all_ok && core.is_core;
      worst = std::max(worst, core.worst_violation);
      worst_gap = std::max(worst_gap, core.efficiency_gap);
      per_hour.push_back({{"issuance_time", reconciled.issuance_times[t]},
                          {"lead_time", reconciled.lead_times[k]},
                          {"is_core", core.is_core},
                          {"worst_violation", core.worst_violation},
                          {"efficiency_gap", core.efficiency_gap}});
    }
  }
  nlohmann::json cj;
  cj["audited"] = true;
  cj["all_hours_in_core"] = all_ok;
  cj["worst_violation"] = worst;
  cj["worst_efficiency_gap"] = worst_gap;
  cj["hours"] = per_hour;
  write_json(dir / "core_audit.json", cj);

  std::cout << "audit " << (all_ok ? "passed" : "FAILED") << ": worst coalition violation "
            << format_double(worst) << ", worst efficiency gap " << format_double(worst_gap)
            << "\n";
  return all_ok ? 0 : 2;
}

}  // namespace windpool
