"""
Market data ingestion.

Loads price series and long-format implied-vol panels from CSV, computes
returns and joins vol panels with returns by date. Dates are opaque ISO-8601
tokens compared lexically; no calendar arithmetic is done anywhere.
"""

from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import logging

import numpy as np
import pandas as pd

from implied_leverage.core.config import settings
from implied_leverage.core.errors import LeverageError, InputFileError
from implied_leverage.models.schemas import (
    AlignedPanel,
    ImpliedVolPanel,
    PriceSeries,
    ReturnKind,
    ReturnSeries
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PANEL_COLUMNS = ("date", "maturity_days", "atm_vol")


def _read_csv(path: PathLike) -> pd.DataFrame:
    """Read a CSV as strings, mapping I/O and parser failures to coded errors."""
    path = Path(path)
    try:
        return pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            comment="#",
            encoding="utf-8",
            skipinitialspace=True
        )
    except FileNotFoundError:
        raise LeverageError(f"file not found: {path}", code="io-error")
    except OSError as e:
        raise LeverageError(f"cannot read {path}: {e}", code="io-error")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputFileError(f"cannot parse {path}: {e}")


def _require_columns(frame: pd.DataFrame, columns, path: PathLike) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InputFileError(f"{path}: missing column(s) {', '.join(missing)}")


def _numeric_column(frame: pd.DataFrame, column: str, path: PathLike, allow_empty: bool = False) -> pd.Series:
    """Parse one column as floats; the first bad cell is reported by CSV row and column."""
    raw = frame[column].str.strip()
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna()
    if allow_empty:
        bad &= raw != ""
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        # +2: one for the header, one for 1-based numbering
        raise InputFileError(
            f"{path}: row {row + 2}, column '{column}': cannot parse {frame[column].iloc[row]!r} as a number"
        )
    return values


def _date_column(frame: pd.DataFrame, column: str, path: PathLike) -> pd.Series:
    dates = frame[column].str.strip()
    empty = dates == ""
    if empty.any():
        row = int(np.flatnonzero(empty.to_numpy())[0])
        raise InputFileError(f"{path}: row {row + 2}, column '{column}': empty date")
    return dates


def load_price_series(
    path: PathLike,
    date_column: str = "date",
    price_column: str = "close",
    ticker: Optional[str] = None
) -> PriceSeries:
    """
    Load a dated price series from CSV.

    Args:
        path: CSV file with a header row
        date_column: Name of the ISO-8601 date column
        price_column: Name of the price column
        ticker: Identifier for the series; defaults to the file stem

    Returns:
        PriceSeries sorted by date

    Raises:
        LeverageError: io-error, parse-error, duplicate-date, non-positive-price
    """
    frame = _read_csv(path)
    _require_columns(frame, (date_column, price_column), path)

    dates = _date_column(frame, date_column, path)
    prices = _numeric_column(frame, price_column, path)

    duplicated = dates.duplicated(keep=False)
    if duplicated.any():
        first = dates[duplicated].iloc[0]
        raise LeverageError(f"{path}: duplicate date {first}", code="duplicate-date")

    non_positive = ~(prices > 0) | ~np.isfinite(prices)
    if non_positive.any():
        row = int(np.flatnonzero(non_positive.to_numpy())[0])
        raise LeverageError(
            f"{path}: row {row + 2}: price {prices.iloc[row]} is not positive",
            code="non-positive-price"
        )

    if len(dates) < 2:
        raise LeverageError(f"{path}: at least 2 prices are required", code="series-too-short")

    order = np.argsort(dates.to_numpy(), kind="stable")
    series = PriceSeries(
        ticker=ticker or Path(path).stem,
        dates=tuple(dates.to_numpy()[order].tolist()),
        prices=tuple(prices.to_numpy(dtype=float)[order].tolist())
    )
    logger.info(f"Loaded {len(series.dates)} prices for {series.ticker} from {path}")
    return series


def compute_returns(prices: PriceSeries, kind: ReturnKind = ReturnKind.LOG) -> ReturnSeries:
    """
    Compute daily returns, each dated by the later of its two prices.

    """
    p = prices.as_array()
    if p.size < 2:
        raise LeverageError("at least 2 prices are required", code="series-too-short")

    if ReturnKind(kind) == ReturnKind.LOG:
        returns = np.log(p[1:] / p[:-1])
    else:
        returns = p[1:] / p[:-1] - 1.0

    return ReturnSeries(
        ticker=prices.ticker,
        dates=prices.dates[1:],
        returns=tuple(returns.tolist())
    )


def slice_dates(returns: ReturnSeries, start: Optional[str] = None, end: Optional[str] = None) -> ReturnSeries:
    """Restrict a return series to start <= date <= end (both optional, inclusive)."""
    keep = [
        i for i, d in enumerate(returns.dates)
        if (start is None or d >= start) and (end is None or d <= end)
    ]
    if len(keep) < 2:
        raise LeverageError(
            f"window [{start or '-'}, {end or '-'}] leaves {len(keep)} returns; at least 2 are required",
            code="series-too-short"
        )
    if len(keep) == len(returns.dates):
        return returns
    values = returns.as_array()[keep]
    return ReturnSeries(
        ticker=returns.ticker,
        dates=tuple(returns.dates[i] for i in keep),
        returns=tuple(values.tolist())
    )


def load_vol_panel(path: PathLike, ticker: Optional[str] = None) -> ImpliedVolPanel:
    """
    Load a long-format ATM implied-vol panel.

    The file has the header ``date,maturity_days,atm_vol`` (plus an optional
    ``ticker`` column) and one row per (date, maturity). Empty vol cells and
    absent rows become missing cells; nothing is zero-filled.

    Raises:
        LeverageError: io-error, parse-error, non-positive-vol,
            inconsistent-maturity-set
    """
    frame = _read_csv(path)
    _require_columns(frame, PANEL_COLUMNS, path)

    if ticker is None and "ticker" in frame.columns:
        tickers = sorted(set(frame["ticker"].str.strip()) - {""})
        if len(tickers) > 1:
            raise InputFileError(f"{path}: one ticker per panel file, found {', '.join(tickers)}")
        ticker = tickers[0] if tickers else None
    ticker = ticker or Path(path).stem

    dates = _date_column(frame, "date", path)
    maturities = _numeric_column(frame, "maturity_days", path)
    bad_maturity = (maturities < 1) | (maturities != np.floor(maturities))
    if bad_maturity.any():
        row = int(np.flatnonzero(bad_maturity.to_numpy())[0])
        raise InputFileError(
            f"{path}: row {row + 2}, column 'maturity_days': {frame['maturity_days'].iloc[row]!r} is not a positive integer"
        )
    vols = _numeric_column(frame, "atm_vol", path, allow_empty=True)

    non_positive = vols.notna() & ~(vols > 0)
    if non_positive.any():
        row = int(np.flatnonzero(non_positive.to_numpy())[0])
        raise LeverageError(
            f"{path}: row {row + 2}: atm_vol {vols.iloc[row]} is not positive",
            code="non-positive-vol"
        )

    cells: Dict[Tuple[str, int], Optional[float]] = {}
    for date, maturity, vol in zip(dates, maturities.astype(int), vols):
        key = (date, int(maturity))
        value = None if pd.isna(vol) else float(vol)
        if key in cells and cells[key] != value:
            raise LeverageError(
                f"{path}: maturity {key[1]} has conflicting vols on {key[0]}",
                code="inconsistent-maturity-set"
            )
        cells[key] = value

    if not cells:
        raise InputFileError(f"{path}: panel has no rows")

    all_dates = sorted({d for d, _ in cells})
    all_maturities = sorted({m for _, m in cells})
    grid = tuple(
        tuple(cells.get((d, m)) for m in all_maturities)
        for d in all_dates
    )
    panel = ImpliedVolPanel(
        ticker=ticker,
        dates=tuple(all_dates),
        maturities=tuple(all_maturities),
        vols=grid
    )
    logger.info(
        f"Loaded vol panel for {ticker}: {len(all_dates)} dates x {len(all_maturities)} maturities"
    )
    return panel


def align(panel: ImpliedVolPanel, returns: ReturnSeries) -> AlignedPanel:
    """
    Inner-join a vol panel with returns on date.

    Keeps dates that carry a return and at least one vol. Maturity columns
    with fewer than ``settings.min_regression_obs`` joined cells are flagged
    in ``sparse_maturities``, never dropped.

    Raises:
        LeverageError: empty-intersection
    """
    by_date = dict(zip(returns.dates, returns.returns))

    rows: List[int] = [
        i for i, (date, row) in enumerate(zip(panel.dates, panel.vols))
        if date in by_date and any(v is not None for v in row)
    ]
    if not rows:
        raise LeverageError(
            f"no common dates between the {panel.ticker} vol panel and returns",
            code="empty-intersection"
        )

    dates = tuple(panel.dates[i] for i in rows)
    vols = tuple(panel.vols[i] for i in rows)
    counts = [sum(row[j] is not None for row in vols) for j in range(len(panel.maturities))]
    sparse = tuple(m for m, c in zip(panel.maturities, counts) if c < settings.min_regression_obs)
    if sparse:
        logger.warning(
            f"{panel.ticker}: maturities {list(sparse)} have fewer than "
            f"{settings.min_regression_obs} joined observations"
        )

    return AlignedPanel(
        ticker=panel.ticker,
        dates=dates,
        returns=tuple(by_date[d] for d in dates),
        maturities=panel.maturities,
        vols=vols,
        sparse_maturities=sparse
    )
