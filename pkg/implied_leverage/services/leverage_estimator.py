"""
Leverage correlation estimator.

g_L(l) = <r_i r_{i+l}^2>_c / sigma^3, estimated with full demeaning of both
factors, subtraction of the second moment and a per-lag denominator N - l.
sigma is the whole-sample volatility. Error bars come from a circular
moving-block bootstrap.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple
import logging

import numpy as np
from arch.bootstrap import CircularBlockBootstrap

from implied_leverage.core.config import settings
from implied_leverage.core.errors import LeverageError
from implied_leverage.models.schemas import LeverageFunction, ReturnSeries

logger = logging.getLogger(__name__)


def _sigma(r: np.ndarray) -> float:
    if r.size < 2:
        raise LeverageError("at least 2 returns are required", code="series-too-short")
    if np.all(r == r[0]):
        raise LeverageError("returns have zero variance", code="zero-variance")
    sigma = float(np.std(r, ddof=1))
    if sigma == 0.0:
        raise LeverageError("returns have zero variance", code="zero-variance")
    return sigma


def _leverage_values(r: np.ndarray, max_lag: int) -> Tuple[np.ndarray, float]:
    """Point estimate of g_L(0..max_lag) and the normalizing sigma."""
    sigma = _sigma(r)
    n = r.size
    x = r - r.mean()
    sq = x * x
    y = sq - sq.mean()
    values = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        values[lag] = np.dot(x[:n - lag], y[lag:]) / (n - lag)
    return values / sigma ** 3, sigma


def _check_lag(n: int, max_lag: int, min_overlap: int) -> None:
    if max_lag < 1:
        raise LeverageError(f"max_lag must be at least 1, got {max_lag}", code="invalid-parameter")
    if n < max_lag + min_overlap:
        raise LeverageError(
            f"{n} returns cannot support max_lag={max_lag} "
            f"(need at least {max_lag + min_overlap})",
            code="series-too-short"
        )


def estimate_sigma(returns: ReturnSeries) -> float:
    """Sample standard deviation of the returns (mean removed, N-1 denominator)."""
    return _sigma(returns.as_array())


def estimate_leverage(
    returns: ReturnSeries,
    max_lag: int,
    min_overlap: Optional[int] = None
) -> LeverageFunction:
    """
    Estimate the leverage correlation function on lags 0..max_lag.

    Args:
        returns: Daily returns, oldest first
        max_lag: Largest lag in trading days
        min_overlap: Minimum number of products behind the largest lag;
            defaults to ``settings.min_lag_overlap``

    Returns:
        LeverageFunction without standard errors

    Raises:
        LeverageError: series-too-short, zero-variance, invalid-parameter
    """
    min_overlap = settings.min_lag_overlap if min_overlap is None else min_overlap
    r = returns.as_array()
    _check_lag(r.size, max_lag, min_overlap)
    values, sigma = _leverage_values(r, max_lag)
    logger.info(f"Estimated g_L for {returns.ticker}: {r.size} returns, max_lag={max_lag}, sigma={sigma:.6g}")
    return LeverageFunction(
        lags=tuple(range(max_lag + 1)),
        values=tuple(values.tolist()),
        sigma=sigma,
        n_obs=int(r.size)
    )


def bootstrap_errors(
    returns: ReturnSeries,
    max_lag: int,
    n_boot: Optional[int] = None,
    block_len: Optional[int] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    min_overlap: Optional[int] = None
) -> LeverageFunction:
    """
    Point estimate of g_L with circular moving-block bootstrap standard errors.

    Every replicate draws from its own stream spawned from ``seed`` by
    replicate index, so the result does not depend on how many worker
    threads run the replicates.

    Args:
        returns: Daily returns, oldest first
        max_lag: Largest lag in trading days
        n_boot: Number of replicates (>= 100); defaults to ``settings.n_boot``
        block_len: Block length in days; defaults to 2 * max_lag
        seed: Root seed; defaults to ``settings.seed``
        workers: Thread count; defaults to ``settings.bootstrap_workers``

    Raises:
        LeverageError: as estimate_leverage, plus invalid-parameter
    """
    n_boot = settings.n_boot if n_boot is None else n_boot
    block_len = 2 * max_lag if block_len is None else block_len
    seed = settings.seed if seed is None else seed
    workers = settings.bootstrap_workers if workers is None else workers

    point = estimate_leverage(returns, max_lag, min_overlap=min_overlap)

    if n_boot < 100:
        raise LeverageError(f"n_boot must be at least 100, got {n_boot}", code="invalid-parameter")
    if block_len < 1 or block_len > point.n_obs:
        raise LeverageError(
            f"block_len must lie in [1, {point.n_obs}], got {block_len}",
            code="invalid-parameter"
        )

    r = returns.as_array()
    children = np.random.SeedSequence(seed).spawn(n_boot)

    def replicate(index: int) -> np.ndarray:
        bs = CircularBlockBootstrap(block_len, r, seed=np.random.default_rng(children[index]))
        (sample,), _ = next(bs.bootstrap(1))
        values, _ = _leverage_values(np.asarray(sample, dtype=float), max_lag)
        return values

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(replicate, range(n_boot)))
    else:
        draws = [replicate(i) for i in range(n_boot)]

    std_errors = np.std(np.vstack(draws), axis=0, ddof=1)
    logger.info(
        f"Bootstrapped g_L for {returns.ticker}: n_boot={n_boot}, block_len={block_len}, seed={seed}"
    )
    return point.model_copy(update={"std_errors": tuple(std_errors.tolist())})
