#include "windpool/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

namespace fs = std::filesystem;

namespace windpool {

Hierarchy DatasetManifest::hierarchy() const {
  std::vector<double> caps;
  caps.reserve(sites.size());
  for (const auto& s : sites) caps.push_back(s.capacity_mw);
  return Hierarchy(caps);
}

void DatasetManifest::validate() const {
  if (sites.empty()) throw ConfigError("manifest needs at least one site");
  for (const auto& s : sites) {
    if (s.name.empty()) throw ConfigError("manifest site with empty name");
    if (s.name == kAggregateSeriesName) {
      throw ConfigError("site name '" + s.name + "' is reserved for the aggregate series");
    }
    if (!(s.capacity_mw > 0.0)) throw ConfigError("site " + s.name + " needs a positive capacity");
  }
  std::set<std::string> names;
  for (const auto& s : sites) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate site name " + s.name);
  }
  if (n_scenarios < 2) throw ConfigError("manifest needs n_scenarios >= 2");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw ConfigError("split_fraction must lie in (0, 1)");
  }
  if (forecasts_path.empty()) throw ConfigError("manifest needs a forecasts path");
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path + " is not valid JSON: " + e.what());
  }
  DatasetManifest m;
  for (const auto& site : j.at("sites")) {
    m.sites.push_back({site.at("name").get<std::string>(), site.at("capacity_mw").get<double>()});
  }
  m.forecasts_path = j.at("forecasts").get<std::string>();
  if (j.contains("observations")) m.observations_path = j.at("observations").get<std::string>();
  m.n_scenarios = j.at("n_scenarios").get<int>();
  if (j.contains("split_fraction")) m.split_fraction = j.at("split_fraction").get<double>();
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();

  // Resolve data paths against the manifest location.
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  resolve(m.forecasts_path);
  resolve(m.observations_path);
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  manifest.validate();
  nlohmann::json j;
  j["sites"] = nlohmann::json::array();
  for (const auto& s : manifest.sites) {
    j["sites"].push_back({{"name", s.name}, {"capacity_mw", s.capacity_mw}});
  }
  j["forecasts"] = fs::path(manifest.forecasts_path).filename().string();
  if (!manifest.observations_path.empty()) {
    j["observations"] = fs::path(manifest.observations_path).filename().string();
  }
  j["n_scenarios"] = manifest.n_scenarios;
  j["split_fraction"] = manifest.split_fraction;
  j["seed"] = manifest.seed;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest " + path);
  out << j.dump(2) << '\n';
}

namespace {

struct CsvRow {
  std::int64_t issuance = 0;
  int lead = 0;
  long long scenario = 0;
  std::string series;
  double value = 0.0;
};

std::vector<CsvRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read data file " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("data file " + path + " is empty");
  // Tolerate a UTF-8 BOM and trailing CR.
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "issuance_time,lead_time,scenario,series,value_mw") {
    throw ConfigError("data file " + path +
                      " has unexpected header '" + line +
                      "' (want issuance_time,lead_time,scenario,series,value_mw)");
  }
  std::vector<CsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 5> fields;
    std::string_view rest = line;
    for (int f = 0; f < 5; ++f) {
      const auto comma = rest.find(',');
      if (f < 4) {
        if (comma == std::string_view::npos) {
          throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 5 fields");
        }
        fields[f] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      } else {
        if (comma != std::string_view::npos) {
          throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 5 fields");
        }
        fields[f] = rest;
      }
    }
    const std::string ctx = path + ":" + std::to_string(line_no);
    CsvRow row;
    row.issuance = parse_int(fields[0], ctx);
    row.lead = static_cast<int>(parse_int(fields[1], ctx));
    row.scenario = parse_int(fields[2], ctx);
    row.series = std::string(fields[3]);
    row.value = parse_double(fields[4], ctx);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string cell_name(std::int64_t t, int k, long long xi, const std::string& series) {
  return "issuance=" + std::to_string(t) + " lead=" + std::to_string(k) +
         " scenario=" + std::to_string(xi) + " series=" + series;
}

}  // namespace

ScenarioPanel load_panel(const DatasetManifest& manifest) {
  manifest.validate();
  std::vector<CsvRow> rows = read_rows(manifest.forecasts_path);
  if (!manifest.observations_path.empty()) {
    std::vector<CsvRow> obs_rows = read_rows(manifest.observations_path);
    for (auto& r : obs_rows) {
      if (r.scenario != -1) {
        throw ConfigError("observation file " + manifest.observations_path +
                          " contains scenario " + std::to_string(r.scenario) +
                          " (observations must use scenario -1)");
      }
    }
    rows.insert(rows.end(), obs_rows.begin(), obs_rows.end());
  }

  std::vector<std::string> series_names{kAggregateSeriesName};
  for (const auto& s : manifest.sites) series_names.push_back(s.name);
  std::map<std::string, int> series_index;
  for (std::size_t i = 0; i < series_names.size(); ++i) series_index[series_names[i]] = i;

  std::set<std::int64_t> time_set;
  std::set<int> lead_set;
  // Scenario id universe per series; ids can differ across agents.
  std::vector<std::set<long long>> series_ids(series_names.size());
  bool any_obs = false;
  for (const auto& r : rows) {
    auto it = series_index.find(r.series);
    if (it == series_index.end()) {
      throw ConfigError("unknown series '" + r.series + "' in data (not in manifest)");
    }
    time_set.insert(r.issuance);
    lead_set.insert(r.lead);
    if (r.scenario == -1) {
      any_obs = true;
    } else {
      series_ids[it->second].insert(r.scenario);
    }
  }
  if (time_set.empty()) throw ConfigError("no data rows in " + manifest.forecasts_path);

  const std::vector<std::int64_t> times(time_set.begin(), time_set.end());
  const std::vector<int> leads(lead_set.begin(), lead_set.end());
  const int n_series = static_cast<int>(series_names.size());
  const int n_target = manifest.n_scenarios;

  // Native storage at per-series scenario counts, then resampled if needed.
  std::vector<std::map<long long, int>> id_to_pos(n_series);
  for (int s = 0; s < n_series; ++s) {
    if (series_ids[s].empty()) {
      throw ConfigError("missing forecast cell: " +
                        cell_name(times[0], leads[0], 1, series_names[s]));
    }
    int pos = 0;
    for (long long id : series_ids[s]) id_to_pos[s][id] = pos++;
  }

  auto panel = ScenarioPanel::empty_like_shape(times, leads, n_target, series_names, any_obs);
  std::map<std::int64_t, int> time_pos;
  for (std::size_t i = 0; i < times.size(); ++i) time_pos[times[i]] = static_cast<int>(i);
  std::map<int, int> lead_pos;
  for (std::size_t i = 0; i < leads.size(); ++i) lead_pos[leads[i]] = static_cast<int>(i);

  // native[(t, k, s)][pos]
  const std::size_t n_cells = times.size() * leads.size() * n_series;
  std::vector<std::vector<double>> native(n_cells);
  std::vector<std::vector<char>> native_seen(n_cells);
  for (int s = 0; s < n_series; ++s) {
    const auto count = series_ids[s].size();
    for (std::size_t t = 0; t < times.size(); ++t) {
      for (std::size_t k = 0; k < leads.size(); ++k) {
        const std::size_t cell = (t * leads.size() + k) * n_series + s;
        native[cell].assign(count, 0.0);
        native_seen[cell].assign(count, 0);
      }
    }
  }
  std::vector<char> obs_seen(times.size() * leads.size() * n_series, 0);

  long long n_clipped = 0;
  std::string first_clip;
  auto clip = [&](double v, int s, const CsvRow& r) {
    const double cap =
        (s == 0) ? manifest.hierarchy().total_capacity() : manifest.sites[s - 1].capacity_mw;
    double clipped = std::clamp(v, 0.0, cap);
    if (clipped != v) {
      if (n_clipped == 0) {
        first_clip = cell_name(r.issuance, r.lead, r.scenario, r.series) + " value " +
                     format_double(v);
      }
      ++n_clipped;
    }
    return clipped;
  };

  for (const auto& r : rows) {
    const int s = series_index.at(r.series);
    const int t = time_pos.at(r.issuance);
    const int k = lead_pos.at(r.lead);
    if (!std::isfinite(r.value)) {
      throw ConfigError("non-finite value at " + cell_name(r.issuance, r.lead, r.scenario, r.series));
    }
    if (r.scenario == -1) {
      const std::size_t oi = panel.obs_index(t, k, s);
      if (obs_seen[oi]) {
        throw ConfigError("duplicate observation at " + cell_name(r.issuance, r.lead, -1, r.series));
      }
      obs_seen[oi] = 1;
      panel.observations[oi] = clip(r.value, s, r);
      continue;
    }
    auto pos_it = id_to_pos[s].find(r.scenario);
    if (pos_it == id_to_pos[s].end()) {
      throw ConfigError("unexpected scenario id at " +
                        cell_name(r.issuance, r.lead, r.scenario, r.series));
    }
    const std::size_t cell = (static_cast<std::size_t>(t) * leads.size() + k) * n_series + s;
    if (native_seen[cell][pos_it->second]) {
      throw ConfigError("duplicate cell: " + cell_name(r.issuance, r.lead, r.scenario, r.series));
    }
    native_seen[cell][pos_it->second] = 1;
    native[cell][pos_it->second] = clip(r.value, s, r);
  }

  // Completeness: first missing cell in canonical order wins the error.
  for (std::size_t t = 0; t < times.size(); ++t) {
    for (std::size_t k = 0; k < leads.size(); ++k) {
      for (int s = 0; s < n_series; ++s) {
        const std::size_t cell = (t * leads.size() + k) * n_series + s;
        auto id_it = series_ids[s].begin();
        for (std::size_t pos = 0; pos < native_seen[cell].size(); ++pos, ++id_it) {
          if (!native_seen[cell][pos]) {
            throw ConfigError("missing forecast cell: " +
                              cell_name(times[t], leads[k], *id_it, series_names[s]));
          }
        }
        if (any_obs && !obs_seen[cell]) {
          throw ConfigError("missing observation cell: " +
                            cell_name(times[t], leads[k], -1, series_names[s]));
        }
      }
    }
  }

  // Fill the aligned panel; series at the target count map member-by-member,
  // others are resampled by empirical quantiles (which imposes a comonotone
  // coupling for that series).
  bool resampled = false;
  for (std::size_t t = 0; t < times.size(); ++t) {
    for (std::size_t k = 0; k < leads.size(); ++k) {
      for (int s = 0; s < n_series; ++s) {
        const std::size_t cell = (t * leads.size() + k) * n_series + s;
        const auto& vals = native[cell];
        const int n_native = static_cast<int>(vals.size());
        if (n_native == n_target) {
          for (int xi = 0; xi < n_target; ++xi) {
            panel.value(static_cast<int>(t), static_cast<int>(k), xi, s) = vals[xi];
          }
        } else {
          resampled = true;
          std::vector<double> sorted = vals;
          std::sort(sorted.begin(), sorted.end());
          for (int xi = 0; xi < n_target; ++xi) {
            const double p = (xi + 0.5) / n_target;
            int idx = static_cast<int>(std::ceil(p * n_native));
            idx = std::clamp(idx, 1, n_native);
            panel.value(static_cast<int>(t), static_cast<int>(k), xi, s) = sorted[idx - 1];
          }
        }
      }
    }
  }

  if (n_clipped > 0) {
    std::cerr << "windpool: clipped " << n_clipped << " out-of-range values to [0, capacity]"
              << " (first: " << first_clip << ")\n";
  }
  if (resampled) {
    std::cerr << "windpool: per-series scenario counts differ; resampled to n_scenarios="
              << n_target << " by empirical-quantile matching\n";
  }
  panel.validate(1e-6);
  return panel;
}

void save_panel(const ScenarioPanel& panel, const std::string& forecasts_path,
                const std::string& observations_path) {
  const char* header = "issuance_time,lead_time,scenario,series,value_mw\n";
  std::ofstream out(forecasts_path);
  if (!out) throw ConfigError("cannot write " + forecasts_path);
  out << header;
  for (int t = 0; t < panel.n_issuance(); ++t) {
    for (int k = 0; k < panel.n_leads(); ++k) {
      for (int xi = 0; xi < panel.n_scenarios; ++xi) {
        for (int s = 0; s < panel.n_series(); ++s) {
          out << panel.issuance_times[t] << ',' << panel.lead_times[k] << ',' << (xi + 1) << ','
              << panel.series[s] << ',' << format_double(panel.value(t, k, xi, s)) << '\n';
        }
      }
    }
  }
  if (observations_path.empty()) return;
  if (!panel.has_observations()) {
    throw ConfigError("panel has no observations to write to " + observations_path);
  }
  std::ofstream obs(observations_path);
  if (!obs) throw ConfigError("cannot write " + observations_path);
  obs << header;
  for (int t = 0; t < panel.n_issuance(); ++t) {
    for (int k = 0; k < panel.n_leads(); ++k) {
      for (int s = 0; s < panel.n_series(); ++s) {
        obs << panel.issuance_times[t] << ',' << panel.lead_times[k] << ",-1,"
            << panel.series[s] << ',' << format_double(panel.observation(t, k, s)) << '\n';
      }
    }
  }
}

std::pair<ScenarioPanel, ScenarioPanel> chronological_split(const ScenarioPanel& panel,
                                                            double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  const int n_days = panel.n_issuance();
  if (n_days < 2) throw ConfigError("chronological split needs at least two issuance times");
  const int n_train = static_cast<int>(std::floor(fraction * n_days));
  if (n_train < 1 || n_train >= n_days) {
    throw ConfigError("split fraction " + format_double(fraction) + " leaves an empty side for " +
                      std::to_string(n_days) + " issuance times");
  }

  auto slice = [&](int begin, int end) {
    ScenarioPanel out = ScenarioPanel::empty_like_shape(
        {panel.issuance_times.begin() + begin, panel.issuance_times.begin() + end},
        panel.lead_times, panel.n_scenarios, panel.series, panel.has_observations());
    for (int t = begin; t < end; ++t) {
      for (int k = 0; k < panel.n_leads(); ++k) {
        for (int xi = 0; xi < panel.n_scenarios; ++xi) {
          for (int s = 0; s < panel.n_series(); ++s) {
            out.value(t - begin, k, xi, s) = panel.value(t, k, xi, s);
          }
        }
        if (panel.has_observations()) {
          for (int s = 0; s < panel.n_series(); ++s) {
            out.observations[out.obs_index(t - begin, k, s)] = panel.observation(t, k, s);
          }
        }
      }
    }
    return out;
  };
  return {slice(0, n_train), slice(n_train, n_days)};
}

void SyntheticSpec::validate() const {
  if (m < 1 || n_scenarios < 2 || n_days < 1) {
    throw ConfigError("synthetic spec needs m >= 1, n_scenarios >= 2, n_days >= 1");
  }
  if (!(correlation_length > 0.0)) throw ConfigError("correlation length must be positive");
  if (!(marginal_scale > 0.0)) throw ConfigError("marginal scale must be positive");
  if (!(dispersion_shrink > 0.0 && dispersion_shrink <= 1.0)) {
    throw ConfigError("dispersion shrink must lie in (0, 1]");
  }
  if (!(warp_exponent > 0.0)) throw ConfigError("warp exponent must be positive");
  if (!std::isfinite(bias_fraction)) throw ConfigError("bias fraction must be finite");
  if (!capacities_mw.empty() && static_cast<int>(capacities_mw.size()) != m) {
    throw ConfigError("capacities list must have m entries");
  }
}

std::vector<double> SyntheticSpec::effective_capacities() const {
  if (!capacities_mw.empty()) return capacities_mw;
  std::vector<double> caps(m);
  for (int i = 0; i < m; ++i) caps[i] = 60.0 + 25.0 * i;
  return caps;
}

Hierarchy SyntheticSpec::hierarchy() const { return Hierarchy(effective_capacities()); }

SyntheticSpec synthetic_spec_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read synthetic spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synthetic spec " + path + " is not valid JSON: " + e.what());
  }
  SyntheticSpec s;
  s.m = j.at("m").get<int>();
  s.n_scenarios = j.at("n_scenarios").get<int>();
  s.n_days = j.at("n_days").get<int>();
  if (j.contains("correlation_length")) s.correlation_length = j.at("correlation_length").get<double>();
  if (j.contains("marginal_location")) s.marginal_location = j.at("marginal_location").get<double>();
  if (j.contains("marginal_scale")) s.marginal_scale = j.at("marginal_scale").get<double>();
  if (j.contains("bias_fraction")) s.bias_fraction = j.at("bias_fraction").get<double>();
  if (j.contains("dispersion_shrink")) s.dispersion_shrink = j.at("dispersion_shrink").get<double>();
  if (j.contains("warp_exponent")) s.warp_exponent = j.at("warp_exponent").get<double>();
  if (j.contains("capacities_mw")) s.capacities_mw = j.at("capacities_mw").get<std::vector<double>>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

namespace {

const SyntheticSpec& validated(const SyntheticSpec& s) {
  s.validate();
  return s;
}

Eigen::MatrixXd latent_cholesky(int m, double correlation_length) {
  Eigen::MatrixXd sigma(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      sigma(i, j) = std::exp(-std::abs(i - j) / correlation_length);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("latent correlation matrix is not positive definite");
  }
  return llt.matrixL();
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd draw_latent(const Eigen::MatrixXd& chol, Rng& rng) {
  Eigen::VectorXd eps(chol.rows());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = normal01(rng);
  return chol * eps;
}

/// Truth marginal: capacity-scaled logistic of the latent value.
double truth_value(const SyntheticSpec& spec, double cap, double z) {
  return cap * logistic(spec.marginal_location + spec.marginal_scale * z);
}

/// Corrupted base-forecast marginal: shrunk latent spread, power-warped
/// normalized output, additive capacity-fraction bias, clipped to range.
double corrupted_value(const SyntheticSpec& spec, double cap, double z) {
  const double u =
      logistic(spec.marginal_location + spec.marginal_scale * spec.dispersion_shrink * z);
  const double warped = std::pow(u, spec.warp_exponent);
  return std::clamp(cap * warped + spec.bias_fraction * cap, 0.0, cap);
}

}  // namespace

TruthSampler::TruthSampler(const SyntheticSpec& spec)
    : spec_(validated(spec)),
      chol_(latent_cholesky(spec.m, spec.correlation_length)),
      capacities_(spec.effective_capacities()),
      rng_(mix_seed(spec.seed, 0x7275u)) {}

Eigen::VectorXd TruthSampler::draw() {
  Eigen::VectorXd z = draw_latent(chol_, rng_);
  Eigen::VectorXd y(spec_.m);
  for (int i = 0; i < spec_.m; ++i) y[i] = truth_value(spec_, capacities_[i], z[i]);
  return y;
}

std::pair<ScenarioPanel, TruthSampler> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::vector<double> caps = spec.effective_capacities();
  const Eigen::MatrixXd chol = latent_cholesky(spec.m, spec.correlation_length);

  std::vector<std::int64_t> times(spec.n_days);
  std::iota(times.begin(), times.end(), 1);
  std::vector<int> leads(24);
  std::iota(leads.begin(), leads.end(), 1);
  std::vector<std::string> series{kAggregateSeriesName};
  for (int i = 0; i < spec.m; ++i) series.push_back("wpp" + std::to_string(i + 1));

  auto panel = ScenarioPanel::empty_like_shape(times, leads, spec.n_scenarios, series, true);
  Rng rng(mix_seed(spec.seed, 0x9e4eu));
  for (int t = 0; t < panel.n_issuance(); ++t) {
    for (int k = 0; k < panel.n_leads(); ++k) {
      // Observation: one draw from the truth, coherent by construction.
      Eigen::VectorXd z_obs = draw_latent(chol, rng);
      Eigen::VectorXd y_obs(spec.m);
      for (int i = 0; i < spec.m; ++i) y_obs[i] = truth_value(spec, caps[i], z_obs[i]);
      Eigen::VectorXd full = aggregate_bottom(y_obs);
      for (int s = 0; s < panel.n_series(); ++s) {
        panel.observations[panel.obs_index(t, k, s)] = full[s];
      }
      // Base forecasts: producers share one corrupted draw per scenario; the
      // aggregate agent reports an independently drawn corrupted sum.
      for (int xi = 0; xi < spec.n_scenarios; ++xi) {
        Eigen::VectorXd z_parts = draw_latent(chol, rng);
        for (int i = 0; i < spec.m; ++i) {
          panel.value(t, k, xi, i + 1) = corrupted_value(spec, caps[i], z_parts[i]);
        }
        Eigen::VectorXd z_agent = draw_latent(chol, rng);
        double agent_sum = 0.0;
        for (int i = 0; i < spec.m; ++i) agent_sum += corrupted_value(spec, caps[i], z_agent[i]);
        panel.value(t, k, xi, 0) = agent_sum;
      }
    }
  }
  panel.validate(1e-6);
  return {std::move(panel), TruthSampler(spec)};
}

}  // namespace windpool
