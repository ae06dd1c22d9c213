"""Pooled probabilistic wind-power forecasting, cooperative offering and settlement."""

from windpool._core import (  # noqa: F401
    AllocationVector,
    EnergyScoreResult,
    Hierarchy,
    OfferSolution,
    PriceTriple,
    Reconciler,
    SyntheticSpec,
    TruthSampler,
    WindpoolConfigError,
    WindpoolNumericalError,
    __version__,
    aggregate_bottom,
    audit_core,
    band_depth_prerank,
    characteristic_value,
    chi_square_uniform_pvalue,
    consistency_band,
    cooperative_profit,
    critical_ratio,
    deviation_from_uniform,
    energy_score,
    energy_score_subgradient,
    expected_allocation,
    expected_imbalance_cost,
    expost_shares,
    independent_profit,
    is_coherent,
    multivariate_rank,
    quantile_offer,
    realized_cost,
    solve_offer,
    structure_matrix,
)
