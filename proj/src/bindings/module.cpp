#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "windpool/allocation.hpp"
#include "windpool/data.hpp"
#include "windpool/hierarchy.hpp"
#include "windpool/market.hpp"
#include "windpool/reconcile.hpp"
#include "windpool/scoring.hpp"

namespace py = pybind11;
using namespace py::literals;
namespace wp = windpool;

namespace {

wp::Rng seeded_rng(std::uint64_t seed) { return wp::Rng(wp::mix_seed(seed, 0x9fu)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pooled probabilistic wind-power forecasting, cooperative offering and settlement";
  m.attr("__version__") = wp::kVersion;

  py::register_exception<wp::ConfigError>(m, "WindpoolConfigError", PyExc_ValueError);
  py::register_exception<wp::NumericalError>(m, "WindpoolNumericalError", PyExc_RuntimeError);

  // hierarchy
  py::class_<wp::Hierarchy>(m, "Hierarchy")
      .def(py::init<std::vector<double>>(), "capacities_mw"_a)
      .def_property_readonly("m", &wp::Hierarchy::m)
      .def_property_readonly("capacities", &wp::Hierarchy::capacities)
      .def_property_readonly("total_capacity", &wp::Hierarchy::total_capacity)
      .def("fingerprint", &wp::Hierarchy::fingerprint);
  m.def("structure_matrix", &wp::structure_matrix, "hierarchy"_a);
  m.def("is_coherent", &wp::is_coherent, "vector"_a, "tol"_a);
  m.def("aggregate_bottom", &wp::aggregate_bottom, "bottom"_a);

  // scoring
  py::class_<wp::EnergyScoreResult>(m, "EnergyScoreResult")
      .def_readonly("value", &wp::EnergyScoreResult::value)
      .def_readonly("accuracy", &wp::EnergyScoreResult::accuracy)
      .def_readonly("spread", &wp::EnergyScoreResult::spread);
  m.def("energy_score", &wp::energy_score, "scenarios"_a, "observation"_a);
  m.def("energy_score_subgradient", &wp::energy_score_subgradient, "scenarios"_a,
        "observation"_a);
  m.def(
      "band_depth_prerank",
      [](const Eigen::MatrixXd& vectors, std::uint64_t seed) {
        auto rng = seeded_rng(seed);
        return wp::band_depth_prerank(vectors, rng);
      },
      "vectors"_a, "seed"_a = 1);
  m.def(
      "multivariate_rank",
      [](const Eigen::MatrixXd& scenarios, const Eigen::VectorXd& observation,
         std::uint64_t seed) {
        auto rng = seeded_rng(seed);
        return wp::multivariate_rank(scenarios, observation, rng);
      },
      "scenarios"_a, "observation"_a, "seed"_a = 1);
  m.def("consistency_band", &wp::consistency_band, "n_scenarios"_a, "n_cases"_a,
        "level"_a = 0.95, "n_sim"_a = 1000, "seed"_a = 1);
  m.def(
      "deviation_from_uniform",
      [](const std::vector<long long>& counts) {
        wp::RankHistogram h;
        h.counts = counts;
        for (long long c : counts) h.total += c;
        return wp::deviation_from_uniform(h);
      },
      "counts"_a);
  m.def(
      "chi_square_uniform_pvalue",
      [](const std::vector<long long>& counts) { return wp::chi_square_uniform(counts).p_value; },
      "counts"_a);

  // market
  py::class_<wp::PriceTriple>(m, "PriceTriple")
      .def(py::init([](double pi_f, double psi_plus, double psi_minus) {
             wp::PriceTriple p{pi_f, psi_plus, psi_minus};
             p.validate();
             return p;
           }),
           "pi_f"_a, "psi_plus"_a, "psi_minus"_a)
      .def_readonly("pi_f", &wp::PriceTriple::pi_f)
      .def_readonly("psi_plus", &wp::PriceTriple::psi_plus)
      .def_readonly("psi_minus", &wp::PriceTriple::psi_minus);
  py::class_<wp::OfferSolution>(m, "OfferSolution")
      .def_readonly("offer", &wp::OfferSolution::offer)
      .def_readonly("expected_cost", &wp::OfferSolution::expected_cost)
      .def_readonly("duals", &wp::OfferSolution::duals)
      .def_readonly("provenance", &wp::OfferSolution::provenance);
  m.def("critical_ratio", &wp::critical_ratio, "prices"_a);
  m.def("quantile_offer", &wp::quantile_offer, "scenarios_mw"_a, "prices"_a);
  m.def("expected_imbalance_cost", &wp::expected_imbalance_cost, "scenarios_mw"_a, "offer"_a,
        "prices"_a);
  m.def("solve_offer", &wp::solve_offer, "scenarios_mw"_a, "prices"_a, "capacity_mw"_a);
  m.def("realized_cost", &wp::realized_cost, "offer_mw"_a, "actual_mw"_a, "prices"_a);
  m.def("independent_profit", &wp::independent_profit, "offer_mw"_a, "actual_mw"_a, "prices"_a);

  // allocation
  py::class_<wp::AllocationVector>(m, "AllocationVector")
      .def_readonly("a", &wp::AllocationVector::a)
      .def_readonly("duals", &wp::AllocationVector::duals)
      .def_readonly("bottom_scenarios", &wp::AllocationVector::bottom_scenarios);
  m.def("expected_allocation", &wp::expected_allocation, "bottom_scenarios"_a, "duals"_a,
        "aggregate_scenarios"_a, "coherence_tol"_a = 1e-6);
  m.def("expost_shares", &wp::expost_shares, "allocation"_a, "aggregate_realized_cost"_a);
  m.def("cooperative_profit", &wp::cooperative_profit, "actual_mw"_a, "allocated_cost"_a,
        "prices"_a);
  m.def("characteristic_value", &wp::characteristic_value, "members"_a, "bottom_scenarios"_a,
        "prices"_a, "capacities_mw"_a);
  m.def(
      "audit_core",
      [](const wp::AllocationVector& alloc, const wp::PriceTriple& p,
         const std::vector<double>& capacities, double tol) {
        wp::CoreAuditReport r = wp::audit_core(alloc, p, capacities, tol);
        py::dict out;
        out["is_core"] = r.is_core;
        out["worst_violation"] = r.worst_violation;
        out["efficiency_gap"] = r.efficiency_gap;
        py::list rows;
        for (const auto& row : r.coalitions) {
          py::dict d;
          d["mask"] = row.mask;
          d["value"] = row.value;
          d["allocated"] = row.allocated;
          d["violation"] = row.violation;
          rows.append(d);
        }
        out["coalitions"] = rows;
        return out;
      },
      "allocation"_a, "prices"_a, "capacities_mw"_a, "tol"_a = 1e-6);

  // reconciliation
  py::class_<wp::Reconciler>(m, "Reconciler")
      .def_static("bottom_up", &wp::Reconciler::bottom_up, "hierarchy"_a)
      .def_static("projection", &wp::Reconciler::projection, "hierarchy"_a, "q"_a)
      .def_static("projection_identity", &wp::Reconciler::projection_identity, "hierarchy"_a)
      .def_static("nonparametric_zero", &wp::Reconciler::nonparametric_zero, "hierarchy"_a)
      .def_property_readonly("kind",
                             [](const wp::Reconciler& r) { return wp::to_string(r.kind()); })
      .def("apply", &wp::Reconciler::apply, "base"_a)
      .def("save", &wp::Reconciler::save, "path"_a)
      .def_static("load", &wp::Reconciler::load, "path"_a);

  // synthetic data
  py::class_<wp::SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("m", &wp::SyntheticSpec::m)
      .def_readwrite("n_scenarios", &wp::SyntheticSpec::n_scenarios)
      .def_readwrite("n_days", &wp::SyntheticSpec::n_days)
      .def_readwrite("correlation_length", &wp::SyntheticSpec::correlation_length)
      .def_readwrite("marginal_location", &wp::SyntheticSpec::marginal_location)
      .def_readwrite("marginal_scale", &wp::SyntheticSpec::marginal_scale)
      .def_readwrite("bias_fraction", &wp::SyntheticSpec::bias_fraction)
      .def_readwrite("dispersion_shrink", &wp::SyntheticSpec::dispersion_shrink)
      .def_readwrite("warp_exponent", &wp::SyntheticSpec::warp_exponent)
      .def_readwrite("capacities_mw", &wp::SyntheticSpec::capacities_mw)
      .def_readwrite("seed", &wp::SyntheticSpec::seed);
  py::class_<wp::TruthSampler>(m, "TruthSampler")
      .def(py::init<const wp::SyntheticSpec&>(), "spec"_a)
      .def("draw", &wp::TruthSampler::draw);
}
