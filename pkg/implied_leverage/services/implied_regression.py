"""
Empirical implied leverage coefficient.

For each maturity, the relative daily change of the ATM implied vol,
y_t = (Sigma_t - Sigma_{t-1}) / Sigma_{t-1}, is regressed on the same-day
return x_t = r_t with an intercept. Slopes are then averaged with equal
weights over the tickers of a capitalisation tranche.
"""

from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np

from implied_leverage.core.config import settings
from implied_leverage.core.errors import LeverageError
from implied_leverage.models.schemas import AlignedPanel, GammaCurve, GammaKind, RegressionResult
from implied_leverage.services.ols import robust_ols

logger = logging.getLogger(__name__)


def pair_samples(panel: AlignedPanel, maturity: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regression samples from adjacent rows where both vols exist.

    A gap in the vol column breaks the pair on either side of it.
    """
    if maturity not in panel.maturities:
        raise LeverageError(
            f"maturity {maturity} is not in the {panel.ticker} panel",
            code="invalid-input"
        )
    vols = panel.column(maturity)
    returns = panel.returns_array()
    valid = np.isfinite(vols[:-1]) & np.isfinite(vols[1:])
    previous, current = vols[:-1][valid], vols[1:][valid]
    return returns[1:][valid], (current - previous) / previous


def clip_quantiles(y: np.ndarray, q: float) -> np.ndarray:
    """Clip y symmetrically to its [q, 1-q] quantiles."""
    if not 0 < q < 0.5:
        raise LeverageError(f"clip quantile must lie in (0, 0.5), got {q}", code="invalid-parameter")
    low, high = np.quantile(y, [q, 1.0 - q])
    return np.clip(y, low, high)


def implied_gamma(panel: AlignedPanel, maturity: int, clip: Optional[float] = None) -> RegressionResult:
    """
    OLS of relative daily ATM-vol changes on returns for one maturity.

    Args:
        panel: Vols aligned with same-day returns
        maturity: Maturity column to regress
        clip: Optional symmetric quantile for clipping outlier vol changes

    Returns:
        RegressionResult with robust standard error

    Raises:
        LeverageError: insufficient-observations, degenerate-regressor
    """
    x, y = pair_samples(panel, maturity)
    needed = settings.min_regression_obs + 1
    if x.size < needed:
        raise LeverageError(
            f"{panel.ticker} maturity {maturity}: {x.size} consecutive pairs, need {needed}",
            code="insufficient-observations"
        )
    if np.var(x) < settings.degenerate_variance:
        raise LeverageError(
            f"{panel.ticker} maturity {maturity}: returns have no variance",
            code="degenerate-regressor"
        )
    if clip is not None:
        y = clip_quantiles(y, clip)
        logger.warning(f"{panel.ticker} maturity {maturity}: vol changes clipped at quantile {clip}")

    fit = robust_ols(x, y)
    return RegressionResult(
        ticker=panel.ticker,
        maturity=maturity,
        slope=fit.slope,
        intercept=fit.intercept,
        std_err=fit.std_err,
        n_obs=fit.n_obs
    )


def regress_panel(panel: AlignedPanel, clip: Optional[float] = None) -> List[RegressionResult]:
    """Regress every maturity of one panel; columns too sparse to regress are skipped."""
    results = []
    for maturity in panel.maturities:
        try:
            results.append(implied_gamma(panel, maturity, clip=clip))
        except LeverageError as e:
            if e.code != "insufficient-observations":
                raise
            logger.warning(f"Skipping {panel.ticker} maturity {maturity}: {e}")
    return results


def group_by_maturity(results: Sequence[RegressionResult]) -> Dict[int, List[RegressionResult]]:
    groups: Dict[int, List[RegressionResult]] = defaultdict(list)
    for result in sorted(results, key=lambda r: (r.ticker, r.maturity)):
        groups[result.maturity].append(result)
    return dict(sorted(groups.items()))


def tranche_average(groups: Mapping[int, Sequence[RegressionResult]]) -> GammaCurve:
    """
    Equal-weight mean slope per maturity across the tickers of a tranche.

    std_err is the cross-sectional standard deviation over sqrt(n_tickers);
    a single ticker gives std_err = 0.

    Raises:
        LeverageError: empty-group, mixed-maturity-group
    """
    maturities, gammas, errors = [], [], []
    for maturity in sorted(groups):
        group = groups[maturity]
        if not group:
            raise LeverageError(f"no regressions for maturity {maturity}", code="empty-group")
        found = sorted({r.maturity for r in group})
        if found != [maturity]:
            raise LeverageError(
                f"group for maturity {maturity} contains maturities {found}",
                code="mixed-maturity-group"
            )
        slopes = np.array([r.slope for r in group], dtype=float)
        maturities.append(int(maturity))
        gammas.append(float(slopes.mean()))
        errors.append(float(slopes.std(ddof=0) / np.sqrt(slopes.size)))

    return GammaCurve(
        maturities=tuple(maturities),
        gammas=tuple(gammas),
        std_errors=tuple(errors),
        kind=GammaKind.EMPIRICAL
    )


def average_by_tranche(
    results: Sequence[RegressionResult],
    tranche_of: Mapping[str, str]
) -> Dict[str, GammaCurve]:
    """
    Tranche-averaged empirical curves, e.g. large, mid and small caps.

    Raises:
        LeverageError: invalid-input when a ticker has no tranche
    """
    unmapped = sorted({r.ticker for r in results} - set(tranche_of))
    if unmapped:
        raise LeverageError(f"no tranche for tickers {unmapped}", code="invalid-input")
    members: Dict[str, List[RegressionResult]] = defaultdict(list)
    for result in results:
        members[tranche_of[result.ticker]].append(result)
    return {
        tranche: tranche_average(group_by_maturity(group))
        for tranche, group in sorted(members.items())
    }
