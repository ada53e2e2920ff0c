"""
Smile dynamics from the leverage correlation function.

For a return r, the ATM implied vol at fixed moneyness moves by
dSigma/Sigma = gamma(T) r with

    gamma(T)   = 1 / (2 Sigma(0,T) T)   * int_0^T du g_L(u)
    gamma_K(T) = 1 / (2 Sigma(0,T) T^2) * int_0^T du u g_L(u)

for a fixed-strike option near the money. The integrals are evaluated with
the trapezoidal rule on integer lags 0..T, which makes
gamma - gamma_K = skew / Sigma hold on the shared grid.

Moneyness is M = ln(K/S).
"""

from typing import Dict, List, Sequence, Tuple
import logging

import numpy as np
from scipy.integrate import trapezoid

from implied_leverage.core.errors import LeverageError
from implied_leverage.models.schemas import (
    AmplificationFit,
    GammaCurve,
    GammaKind,
    LeverageFunction,
    SkewCurve,
    SmileSlice,
    VolTermStructure
)

logger = logging.getLogger(__name__)


def flat_term_structure(gl: LeverageFunction, maturities: Sequence[int]) -> VolTermStructure:
    """Sigma(0,T) = historical sigma for every maturity."""
    return VolTermStructure.flat(sorted(set(int(m) for m in maturities)), gl.sigma)


def _check_support(gl: LeverageFunction, term: VolTermStructure) -> None:
    longest = term.maturities[-1]
    if longest > gl.max_lag:
        raise LeverageError(
            f"maturity {longest} exceeds the largest available lag {gl.max_lag}",
            code="maturity-exceeds-max-lag"
        )


def _trapezoid_weights(maturity: int) -> np.ndarray:
    weights = np.ones(maturity + 1)
    weights[0] = weights[-1] = 0.5
    return weights


def _moments(gl: LeverageFunction, maturity: int) -> Tuple[float, float, float, float]:
    """Q0, Q1 and, when available, their independent-lag standard errors."""
    g = gl.values_array()[:maturity + 1]
    u = np.arange(maturity + 1, dtype=float)
    q0 = float(trapezoid(g))
    q1 = float(trapezoid(u * g))
    se = gl.std_error_array()
    if se is None:
        return q0, q1, 0.0, 0.0
    w = _trapezoid_weights(maturity) * se[:maturity + 1]
    return q0, q1, float(np.sqrt(np.sum(w ** 2))), float(np.sqrt(np.sum((u * w) ** 2)))


def gamma_moneyness(gl: LeverageFunction, term: VolTermStructure) -> GammaCurve:
    """
    Fixed-moneyness ATM response gamma(T) = Q0 / (2 Sigma T).

    Standard errors of g_L, when present, are propagated assuming
    independent lags.

    Raises:
        LeverageError: maturity-exceeds-max-lag
    """
    _check_support(gl, term)
    gammas, errors = [], []
    for maturity, vol in zip(term.maturities, term.vols):
        q0, _, se0, _ = _moments(gl, maturity)
        scale = 2.0 * vol * maturity
        gammas.append(q0 / scale)
        errors.append(se0 / scale)
    return GammaCurve(
        maturities=term.maturities,
        gammas=tuple(gammas),
        std_errors=tuple(errors) if gl.std_errors is not None else None,
        kind=GammaKind.THEORY_MONEYNESS
    )


def gamma_strike(gl: LeverageFunction, term: VolTermStructure) -> GammaCurve:
    """
    Fixed-strike near-ATM response gamma_K(T) = Q1 / (2 Sigma T^2).

    Raises:
        LeverageError: maturity-exceeds-max-lag
    """
    _check_support(gl, term)
    gammas, errors = [], []
    for maturity, vol in zip(term.maturities, term.vols):
        _, q1, _, se1 = _moments(gl, maturity)
        scale = 2.0 * vol * maturity * maturity
        gammas.append(q1 / scale)
        errors.append(se1 / scale)
    return GammaCurve(
        maturities=term.maturities,
        gammas=tuple(gammas),
        std_errors=tuple(errors) if gl.std_errors is not None else None,
        kind=GammaKind.THEORY_STRIKE
    )


def theoretical_skew(gl: LeverageFunction, term: VolTermStructure) -> SkewCurve:
    """ATM skew implied by g_L: Sigma * (gamma - gamma_K) = int_0^T (T-u) g_L(u) du / (2 T^2)."""
    _check_support(gl, term)
    skews = []
    for maturity in term.maturities:
        g = gl.values_array()[:maturity + 1]
        u = np.arange(maturity + 1, dtype=float)
        skews.append(float(trapezoid((maturity - u) * g)) / (2.0 * maturity * maturity))
    return SkewCurve(maturities=term.maturities, skews=tuple(skews))


def atm_skew_from_smile(smile: SmileSlice) -> float:
    """
    Slope dSigma/dM at M = 0 of the parabola through the three grid points
    nearest to the money (the secant when only two points are quoted).

    Raises:
        LeverageError: grid-does-not-bracket-zero
    """
    grid = np.asarray(smile.moneyness_grid, dtype=float)
    vols = np.asarray(smile.vols, dtype=float)
    if not grid.min() < 0 < grid.max():
        raise LeverageError(
            f"moneyness grid of maturity {smile.maturity} does not bracket M = 0",
            code="grid-does-not-bracket-zero"
        )

    if grid.size == 2:
        return float((vols[1] - vols[0]) / (grid[1] - grid[0]))

    nearest = np.sort(np.argsort(np.abs(grid), kind="stable")[:3])
    x, y = grid[nearest], vols[nearest]
    # derivative at 0 of the Lagrange basis through x
    slope = 0.0
    for i in range(3):
        j, k = [m for m in range(3) if m != i]
        slope += y[i] * (-x[j] - x[k]) / ((x[i] - x[j]) * (x[i] - x[k]))
    return float(slope)


def skew_curve_from_smiles(slices: Sequence[SmileSlice], term: VolTermStructure) -> SkewCurve:
    """One ATM skew per term-structure maturity from quoted smile slices."""
    by_maturity: Dict[int, SmileSlice] = {s.maturity: s for s in slices}
    missing = [m for m in term.maturities if m not in by_maturity]
    if missing:
        raise LeverageError(f"no smile quoted for maturities {missing}", code="maturity-mismatch")
    return SkewCurve(
        maturities=term.maturities,
        skews=tuple(atm_skew_from_smile(by_maturity[m]) for m in term.maturities)
    )


def gamma_sticky_strike(skew: SkewCurve, term: VolTermStructure) -> GammaCurve:
    """
    Smile frozen in strike: a return r moves the ATM point along the smile,
    so gamma_SS(T) = skew(T) / Sigma(0,T).

    Raises:
        LeverageError: maturity-mismatch
    """
    if skew.maturities != term.maturities:
        raise LeverageError(
            f"skew maturities {list(skew.maturities)} differ from term maturities {list(term.maturities)}",
            code="maturity-mismatch"
        )
    return GammaCurve(
        maturities=term.maturities,
        gammas=tuple(s / v for s, v in zip(skew.skews, term.vols)),
        kind=GammaKind.STICKY_STRIKE
    )


def gamma_sticky_delta(maturities: Sequence[int]) -> GammaCurve:
    """Smile frozen in moneyness: the ATM vol does not move."""
    maturities = tuple(int(m) for m in maturities)
    return GammaCurve(
        maturities=maturities,
        gammas=tuple(0.0 for _ in maturities),
        kind=GammaKind.STICKY_DELTA
    )


def gamma_local_vol(sticky: GammaCurve) -> GammaCurve:
    """
    Local volatility doubles the sticky-strike ATM response.

    Raises:
        LeverageError: wrong-kind
    """
    if sticky.kind != GammaKind.STICKY_STRIKE:
        raise LeverageError(
            f"local-vol curve is derived from a sticky_strike curve, got {sticky.kind.value}",
            code="wrong-kind"
        )
    return GammaCurve(
        maturities=sticky.maturities,
        gammas=tuple(2.0 * g for g in sticky.gammas),
        std_errors=tuple(2.0 * e for e in sticky.std_errors) if sticky.std_errors is not None else None,
        kind=GammaKind.LOCAL_VOL
    )


def fit_amplification(empirical: GammaCurve, reference: GammaCurve) -> AmplificationFit:
    """
    Scale factor lambda minimizing sum_T w_T (gamma_emp - lambda gamma_ref)^2.

    Weights are 1/se^2 when every empirical standard error is positive,
    otherwise uniform.

    Raises:
        LeverageError: maturity-mismatch, invalid-input
    """
    if empirical.maturities != reference.maturities:
        raise LeverageError("curves do not share maturities", code="maturity-mismatch")
    e = empirical.gamma_array()
    b = reference.gamma_array()
    if e.size == 0 or not np.any(b != 0):
        raise LeverageError(
            f"cannot scale an identically zero {reference.kind.value} curve",
            code="invalid-input"
        )

    se = None if empirical.std_errors is None else np.asarray(empirical.std_errors, dtype=float)
    if se is not None and np.all(se > 0):
        w = 1.0 / se ** 2
        information = float(np.sum(w * b * b))
        factor = float(np.sum(w * b * e)) / information
        std_err = float(np.sqrt(1.0 / information))
    else:
        information = float(np.sum(b * b))
        factor = float(np.sum(b * e)) / information
        dof = e.size - 1
        residual = e - factor * b
        std_err = float(np.sqrt(np.sum(residual ** 2) / dof / information)) if dof > 0 else 0.0

    logger.info(f"Amplification vs {reference.kind.value}: {factor:.4g} +/- {std_err:.2g}")
    return AmplificationFit(factor=factor, std_err=std_err, reference_kind=reference.kind)


def theory_curves(gl: LeverageFunction, term: VolTermStructure, kinds: Sequence[GammaKind]) -> List[GammaCurve]:
    """Theoretical curves of the requested kinds, in the requested order."""
    builders = {
        GammaKind.THEORY_MONEYNESS: gamma_moneyness,
        GammaKind.THEORY_STRIKE: gamma_strike
    }
    return [builders[kind](gl, term) for kind in kinds]
