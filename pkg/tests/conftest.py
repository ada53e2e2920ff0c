"""Shared test configuration and fixtures."""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from main import limiter
from implied_leverage.models import GammaCurve, GammaKind, LeverageFunction, ReturnSeries, VolTermStructure


@pytest.fixture(autouse=True)
def reset_rate_limiter():
    """Reset rate limiter between tests."""
    # Clear rate limiter storage before each test
    if hasattr(limiter, '_storage'):
        limiter._storage.storage.clear()
    yield
    # Clear again after test
    if hasattr(limiter, '_storage'):
        limiter._storage.storage.clear()


def make_returns(values, ticker="TEST", start=0):
    """ReturnSeries with zero-padded day tokens as dates."""
    values = [float(v) for v in values]
    return ReturnSeries(
        ticker=ticker,
        dates=tuple(f"{start + i:06d}" for i in range(len(values))),
        returns=tuple(values)
    )


def make_gl(values, sigma=0.01, std_errors=None):
    values = [float(v) for v in values]
    return LeverageFunction(
        lags=tuple(range(len(values))),
        values=tuple(values),
        std_errors=None if std_errors is None else tuple(float(e) for e in std_errors),
        sigma=sigma,
        n_obs=0
    )


def business_dates(n, start="2004-01-02"):
    return [d.strftime("%Y-%m-%d") for d in pd.bdate_range(start, periods=n)]


def write_prices(path: Path, returns, start_price=100.0, dates=None):
    """Price CSV whose log returns are exactly ``returns`` up to rounding."""
    returns = np.asarray(returns, dtype=float)
    prices = start_price * np.exp(np.concatenate(([0.0], np.cumsum(returns))))
    dates = dates or business_dates(prices.size)
    pd.DataFrame({"date": dates, "close": prices}).to_csv(path, index=False, float_format="%.17g")
    return dates


def write_panel(path: Path, panel):
    """Long-format vol panel at full precision."""
    rows = [
        (date, maturity, vol)
        for date, row in zip(panel.dates, panel.vols)
        for maturity, vol in zip(panel.maturities, row)
        if vol is not None
    ]
    pd.DataFrame(rows, columns=["date", "maturity_days", "atm_vol"]).to_csv(path, index=False, float_format="%.17g")


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def gaussian_returns(rng):
    """2000 iid N(0, 0.01^2) returns."""
    return make_returns(0.01 * rng.standard_normal(2000))


@pytest.fixture
def flat_term():
    return VolTermStructure.flat([5, 20, 60], 0.01)


@pytest.fixture
def planted_gamma():
    return GammaCurve(maturities=(5, 20, 60), gammas=(-5.0, -3.0, -1.0), kind=GammaKind.THEORY_MONEYNESS)


def read_metadata(path):
    """The ``# key: value`` lines at the top of an output file."""
    metadata = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
    return metadata
