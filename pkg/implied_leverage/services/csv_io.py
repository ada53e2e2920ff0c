"""
CSV emission and the CLI's own readers.

Numbers are printed with ``settings.output_digits`` significant digits and
files are written to a temporary sibling and renamed, so a failed command
never leaves a partial file behind. Metadata travels as leading
``# key: value`` lines.
"""

from io import StringIO
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union
import os
import tempfile

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from implied_leverage.core.config import settings
from implied_leverage.core.errors import InputFileError, LeverageError
from implied_leverage.models.schemas import (
    CompareReport,
    GammaCurve,
    GammaKind,
    ImpliedVolPanel,
    LeverageFunction,
    OracleResult,
    RegressionResult,
    ReturnSeries,
    SkewCurve,
    SmileSlice,
    VolTermStructure
)

PathLike = Union[str, Path]

LEVERAGE_COLUMNS = ["lag", "g_l", "std_err", "sigma", "n_obs"]
GAMMA_COLUMNS = ["maturity_days", "gamma", "std_err", "kind"]
REGRESSION_COLUMNS = ["ticker", "maturity_days", "gamma_hat", "intercept", "std_err", "n_obs"]
RETURN_COLUMNS = ["date_index", "return"]
ORACLE_COLUMNS = ["maturity_days", "slope", "std_err", "theory_gamma"]
COMPARE_COLUMNS = ["maturity_days", "kind", "gamma", "std_err"]


def format_number(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return f"{value:.{settings.output_digits}g}"


def render_csv(
    frame: pd.DataFrame,
    metadata: Optional[Mapping[str, str]] = None
) -> str:
    """Render a frame as CSV text, with optional ``# key: value`` header lines."""
    buffer = StringIO()
    for key, value in (metadata or {}).items():
        buffer.write(f"# {key}: {value}\n")
    frame.to_csv(
        buffer,
        index=False,
        float_format=f"%.{settings.output_digits}g",
        na_rep="",
        lineterminator="\n"
    )
    return buffer.getvalue()


def atomic_write(path: PathLike, text: str) -> Path:
    """Write text to path via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    return path


def _read_table(path: PathLike, columns: Sequence[str], dtype: Optional[Mapping[str, type]] = None) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", encoding="utf-8", dtype=dtype)
    except FileNotFoundError:
        raise LeverageError(f"file not found: {path}", code="io-error")
    except OSError as e:
        raise LeverageError(f"cannot read {path}: {e}", code="io-error")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputFileError(f"cannot parse {path}: {e}")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InputFileError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise InputFileError(f"{path}: no data rows")
    return frame


# ============================================================================
# LEVERAGE FUNCTIONS
# ============================================================================

def leverage_frame(gl: LeverageFunction) -> pd.DataFrame:
    return pd.DataFrame({
        "lag": list(gl.lags),
        "g_l": list(gl.values),
        "std_err": list(gl.std_errors) if gl.std_errors is not None else [np.nan] * len(gl.lags),
        "sigma": [gl.sigma] * len(gl.lags),
        "n_obs": [gl.n_obs] * len(gl.lags)
    }, columns=LEVERAGE_COLUMNS)


def read_leverage(path: PathLike) -> LeverageFunction:
    """Read a ``lag,g_l,std_err,sigma,n_obs`` file written by ``estimate``."""
    frame = _read_table(path, LEVERAGE_COLUMNS).sort_values("lag", kind="stable")
    errors = frame["std_err"]
    return LeverageFunction(
        lags=tuple(int(v) for v in frame["lag"]),
        values=tuple(float(v) for v in frame["g_l"]),
        std_errors=None if errors.isna().any() else tuple(float(v) for v in errors),
        sigma=float(frame["sigma"].iloc[0]),
        n_obs=int(frame["n_obs"].iloc[0])
    )


# ============================================================================
# GAMMA CURVES AND REPORTS
# ============================================================================

def gamma_frame(curves: Iterable[GammaCurve]) -> pd.DataFrame:
    rows = []
    for curve in curves:
        errors = curve.std_errors or (None,) * len(curve.maturities)
        for maturity, gamma, err in zip(curve.maturities, curve.gammas, errors):
            rows.append((maturity, gamma, np.nan if err is None else err, curve.kind.value))
    rows.sort(key=lambda row: row[0])
    return pd.DataFrame(rows, columns=GAMMA_COLUMNS)


def read_gamma_curves(path: PathLike, tranche: Optional[str] = None) -> Dict[GammaKind, GammaCurve]:
    """
    Read ``maturity_days,gamma,std_err,kind`` rows into one curve per kind.

    Files written by ``regress --tranche-out`` may carry a ``tranche`` column;
    with several tranches one must be selected.
    """
    frame = _read_table(path, GAMMA_COLUMNS)
    if "tranche" in frame.columns:
        frame["tranche"] = frame["tranche"].astype(str)
        names = sorted(set(frame["tranche"]))
        if tranche is None and len(names) > 1:
            raise LeverageError(
                f"{path}: holds tranches {', '.join(names)}; select one",
                code="invalid-input"
            )
        if tranche is not None:
            frame = frame[frame["tranche"] == tranche]
            if frame.empty:
                raise LeverageError(f"{path}: no tranche {tranche!r}", code="invalid-input")
    curves = {}
    for kind, rows in frame.groupby("kind", sort=True):
        rows = rows.sort_values("maturity_days", kind="stable")
        errors = rows["std_err"]
        curves[GammaKind(kind)] = GammaCurve(
            maturities=tuple(int(m) for m in rows["maturity_days"]),
            gammas=tuple(float(g) for g in rows["gamma"]),
            std_errors=None if errors.isna().any() else tuple(float(e) for e in errors),
            kind=GammaKind(kind)
        )
    return curves


def compare_frame(report: CompareReport) -> pd.DataFrame:
    order = [kind for kind in GammaKind if kind in report.curves]
    rows = []
    for index, maturity in enumerate(report.maturities):
        for kind in order:
            curve = report.curves[kind]
            err = curve.std_errors[index] if curve.std_errors is not None else np.nan
            rows.append((maturity, kind.value, curve.gammas[index], err))
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


def render_compare(report: CompareReport) -> str:
    return render_csv(compare_frame(report), metadata=report.metadata)


# ============================================================================
# REGRESSIONS, SIMULATIONS, PANELS
# ============================================================================

def regression_frame(results: Sequence[RegressionResult]) -> pd.DataFrame:
    ordered = sorted(results, key=lambda r: (r.ticker, r.maturity))
    return pd.DataFrame(
        [(r.ticker, r.maturity, r.slope, r.intercept, r.std_err, r.n_obs) for r in ordered],
        columns=REGRESSION_COLUMNS
    )


def tranche_frame(curves: Mapping[str, GammaCurve]) -> pd.DataFrame:
    """Tranche-averaged curves; a single unnamed tranche drops the tranche column."""
    frames = []
    for tranche, curve in curves.items():
        frame = gamma_frame([curve])
        if tranche:
            frame.insert(0, "tranche", tranche)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def returns_frame(series: ReturnSeries) -> pd.DataFrame:
    return pd.DataFrame({"date_index": list(series.dates), "return": list(series.returns)}, columns=RETURN_COLUMNS)


def read_returns(path: PathLike, ticker: Optional[str] = None) -> ReturnSeries:
    """Read a ``date_index,return`` file written by ``simulate``."""
    frame = _read_table(path, RETURN_COLUMNS, dtype={"date_index": str})
    return ReturnSeries(
        ticker=ticker or Path(path).stem,
        dates=tuple(frame["date_index"]),
        returns=tuple(float(r) for r in frame["return"])
    )


def oracle_frame(results: Sequence[OracleResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [(o.maturity, o.slope, o.std_err, o.theory_gamma) for o in sorted(results, key=lambda o: o.maturity)],
        columns=ORACLE_COLUMNS
    )


def vol_panel_frame(panel: ImpliedVolPanel) -> pd.DataFrame:
    rows = [
        (panel.ticker, date, maturity, vol)
        for date, row in zip(panel.dates, panel.vols)
        for maturity, vol in zip(panel.maturities, row)
        if vol is not None
    ]
    return pd.DataFrame(rows, columns=["ticker", "date", "maturity_days", "atm_vol"])


def write_vol_panel(panel: ImpliedVolPanel, path: PathLike) -> Path:
    """Long-format panel file; missing cells are omitted."""
    return atomic_write(path, render_csv(vol_panel_frame(panel)))


def prices_frame(dates: Sequence[str], prices: Sequence[float], column: str = "close") -> pd.DataFrame:
    return pd.DataFrame({"date": list(dates), column: list(prices)})


# ============================================================================
# THEORY INPUTS
# ============================================================================

def read_term_structure(path: PathLike) -> VolTermStructure:
    """Read ``maturity_days,atm_vol`` (daily units)."""
    frame = _read_table(path, ["maturity_days", "atm_vol"]).sort_values("maturity_days", kind="stable")
    return VolTermStructure(
        maturities=tuple(int(m) for m in frame["maturity_days"]),
        vols=tuple(float(v) for v in frame["atm_vol"])
    )


def read_skew_curve(path: PathLike) -> SkewCurve:
    """Read ``maturity_days,skew``."""
    frame = _read_table(path, ["maturity_days", "skew"]).sort_values("maturity_days", kind="stable")
    return SkewCurve(
        maturities=tuple(int(m) for m in frame["maturity_days"]),
        skews=tuple(float(s) for s in frame["skew"])
    )


def read_smiles(path: PathLike) -> List[SmileSlice]:
    """Read ``maturity_days,moneyness,vol`` quotes into one slice per maturity."""
    frame = _read_table(path, ["maturity_days", "moneyness", "vol"])
    slices = []
    for maturity, rows in frame.groupby("maturity_days", sort=True):
        rows = rows.sort_values("moneyness", kind="stable")
        slices.append(SmileSlice(
            maturity=int(maturity),
            moneyness_grid=tuple(float(m) for m in rows["moneyness"]),
            vols=tuple(float(v) for v in rows["vol"])
        ))
    return slices


def read_tranche_map(path: PathLike) -> Dict[str, str]:
    """Read ``ticker,tranche``."""
    frame = _read_table(path, ["ticker", "tranche"], dtype={"ticker": str, "tranche": str})
    return {str(t).strip(): str(g).strip() for t, g in zip(frame["ticker"], frame["tranche"])}


# ============================================================================
# SIMULATION CONFIG
# ============================================================================

def read_sim_config(path: PathLike) -> Dict[str, str]:
    """
    Read a flat ``key=value`` simulation config (``#`` comments allowed).

    Keys are returned as written, e.g. ``kernel.amplitude``; values stay strings.
    """
    path = Path(path)
    if not path.is_file():
        raise LeverageError(f"file not found: {path}", code="io-error")
    values = dotenv_values(path, encoding="utf-8")
    empty = sorted(k for k, v in values.items() if v is None)
    if empty:
        raise InputFileError(f"{path}: keys without a value: {', '.join(empty)}")
    return {key.strip(): value.strip() for key, value in values.items()}
