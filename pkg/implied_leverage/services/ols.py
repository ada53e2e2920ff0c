"""Ordinary least squares with an intercept and robust (sandwich) standard errors."""

from typing import NamedTuple, Optional

import numpy as np
import statsmodels.api as sm

from implied_leverage.core.config import settings


class OLSFit(NamedTuple):
    slope: float
    intercept: float
    std_err: float
    n_obs: int


def robust_ols(x: np.ndarray, y: np.ndarray, cov_type: Optional[str] = None) -> OLSFit:
    """Regress y on a constant and x; std_err is the heteroskedasticity-robust SE of the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = sm.add_constant(x, has_constant="add")
    results = sm.OLS(y, design).fit(cov_type=cov_type or settings.robust_cov_type)
    params = np.asarray(results.params)
    bse = np.asarray(results.bse)
    return OLSFit(
        slope=float(params[1]),
        intercept=float(params[0]),
        std_err=max(0.0, float(np.nan_to_num(bse[1]))),
        n_obs=int(x.size)
    )
