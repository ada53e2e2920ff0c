"""Estimation, theory, regression and simulation services."""
from implied_leverage.services.market_data import (
    load_price_series,
    compute_returns,
    slice_dates,
    load_vol_panel,
    align
)
from implied_leverage.services.leverage_estimator import (
    estimate_sigma,
    estimate_leverage,
    bootstrap_errors
)
from implied_leverage.services.smile_theory import (
    flat_term_structure,
    gamma_moneyness,
    gamma_strike,
    theoretical_skew,
    atm_skew_from_smile,
    skew_curve_from_smiles,
    gamma_sticky_strike,
    gamma_sticky_delta,
    gamma_local_vol,
    fit_amplification,
    theory_curves
)
from implied_leverage.services.implied_regression import (
    implied_gamma,
    regress_panel,
    group_by_maturity,
    tranche_average,
    average_by_tranche
)
from implied_leverage.services.leverage_sim import (
    build_kernel,
    check_stability,
    simulate,
    simulate_with_diagnostics,
    kernel_to_gl,
    forward_vol_slope,
    run_oracle,
    synthesize_vol_panel,
    sim_config_from_values
)
from implied_leverage.services.report import restrict_curve, assemble_report

__all__ = [
    "load_price_series",
    "compute_returns",
    "slice_dates",
    "load_vol_panel",
    "align",
    "estimate_sigma",
    "estimate_leverage",
    "bootstrap_errors",
    "flat_term_structure",
    "gamma_moneyness",
    "gamma_strike",
    "theoretical_skew",
    "atm_skew_from_smile",
    "skew_curve_from_smiles",
    "gamma_sticky_strike",
    "gamma_sticky_delta",
    "gamma_local_vol",
    "fit_amplification",
    "theory_curves",
    "implied_gamma",
    "regress_panel",
    "group_by_maturity",
    "tranche_average",
    "average_by_tranche",
    "build_kernel",
    "check_stability",
    "simulate",
    "simulate_with_diagnostics",
    "kernel_to_gl",
    "forward_vol_slope",
    "run_oracle",
    "synthesize_vol_panel",
    "sim_config_from_values",
    "restrict_curve",
    "assemble_report"
]
