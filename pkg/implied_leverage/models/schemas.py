from pydantic import BaseModel, Field, field_validator, model_validator, ConfigDict
from typing import Dict, List, Optional, Sequence, Tuple
from enum import Enum
import math

import numpy as np

from implied_leverage.core.config import settings


def _strictly_increasing(values: Sequence) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


def _all_finite(values: Sequence[float]) -> bool:
    return bool(np.all(np.isfinite(np.asarray(values, dtype=float))))


class ReturnKind(str, Enum):
    """How returns are computed from prices."""
    LOG = "log"
    SIMPLE = "simple"


class GammaKind(str, Enum):
    """Provenance of a gamma curve."""
    EMPIRICAL = "empirical"
    THEORY_MONEYNESS = "theory_moneyness"
    THEORY_STRIKE = "theory_strike"
    STICKY_STRIKE = "sticky_strike"
    STICKY_DELTA = "sticky_delta"
    LOCAL_VOL = "local_vol"


class KernelForm(str, Enum):
    """Functional form of the simulator's leverage kernel."""
    EXPONENTIAL = "exponential"
    POWERLAW = "powerlaw"
    TABLE = "table"


class NoiseKind(str, Enum):
    """Innovation distribution of the simulator."""
    GAUSSIAN = "gaussian"


class TheoryKind(str, Enum):
    """Which theoretical curves to compute."""
    MONEYNESS = "moneyness"
    STRIKE = "strike"
    BOTH = "both"


# ============================================================================
# MARKET DATA
# ============================================================================

class PriceSeries(BaseModel):
    """Dated prices of one instrument."""
    ticker: str = Field(..., min_length=1, max_length=64, description="Instrument identifier")
    dates: Tuple[str, ...] = Field(..., min_length=2, description="ISO-8601 dates, strictly increasing")
    prices: Tuple[float, ...] = Field(..., min_length=2, description="Positive prices, one per date")

    @field_validator('dates')
    @classmethod
    def validate_dates(cls, v):
        if not _strictly_increasing(v):
            raise ValueError("dates must be strictly increasing")
        return v

    @field_validator('prices')
    @classmethod
    def validate_prices(cls, v):
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("prices must be finite and positive")
        return v

    @model_validator(mode='after')
    def validate_lengths(self):
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices must have the same length")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.prices, dtype=float)

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "ticker": "SPX",
                "dates": ["2008-01-02", "2008-01-03", "2008-01-04"],
                "prices": [100.0, 101.0, 99.99]
            }
        }
    )


class ReturnSeries(BaseModel):
    """Dated daily returns of one instrument."""
    ticker: str = Field(..., min_length=1, max_length=64, description="Instrument identifier")
    dates: Tuple[str, ...] = Field(..., min_length=1, description="Dates, strictly increasing")
    returns: Tuple[float, ...] = Field(..., min_length=1, description="Finite daily returns")

    @field_validator('dates')
    @classmethod
    def validate_dates(cls, v):
        if not _strictly_increasing(v):
            raise ValueError("dates must be strictly increasing")
        return v

    @field_validator('returns')
    @classmethod
    def validate_returns(cls, v):
        if not _all_finite(v):
            raise ValueError("returns must be finite")
        return v

    @model_validator(mode='after')
    def validate_lengths(self):
        if len(self.dates) != len(self.returns):
            raise ValueError("dates and returns must have the same length")
        return self

    def __len__(self) -> int:
        return len(self.returns)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.returns, dtype=float)

    model_config = ConfigDict(frozen=True)


class ImpliedVolPanel(BaseModel):
    """Date x maturity grid of ATM implied vols in daily units; None marks a missing cell."""
    ticker: str = Field(..., min_length=1, max_length=64, description="Instrument identifier")
    dates: Tuple[str, ...] = Field(..., min_length=1, description="Dates, strictly increasing")
    maturities: Tuple[int, ...] = Field(..., min_length=1, description="Maturities in trading days")
    vols: Tuple[Tuple[Optional[float], ...], ...] = Field(..., description="Rows follow dates, columns follow maturities")

    @field_validator('dates')
    @classmethod
    def validate_dates(cls, v):
        if not _strictly_increasing(v):
            raise ValueError("dates must be strictly increasing")
        return v

    @field_validator('maturities')
    @classmethod
    def validate_maturities(cls, v):
        if any(m < 1 for m in v) or not _strictly_increasing(v):
            raise ValueError("maturities must be positive and strictly increasing")
        return v

    @model_validator(mode='after')
    def validate_grid(self):
        if len(self.vols) != len(self.dates):
            raise ValueError("vol grid must have one row per date")
        for row in self.vols:
            if len(row) != len(self.maturities):
                raise ValueError("vol grid must have one column per maturity")
            for vol in row:
                if vol is not None and not (math.isfinite(vol) and vol > 0):
                    raise ValueError("implied vols must be finite and positive")
        return self

    def grid(self) -> np.ndarray:
        """Vol grid as a float array with NaN for missing cells."""
        return np.array(
            [[np.nan if v is None else v for v in row] for row in self.vols],
            dtype=float
        ).reshape(len(self.dates), len(self.maturities))

    model_config = ConfigDict(frozen=True)


class AlignedPanel(BaseModel):
    """Implied vols joined with same-day returns."""
    ticker: str = Field(..., min_length=1, max_length=64)
    dates: Tuple[str, ...] = Field(..., min_length=1)
    returns: Tuple[float, ...] = Field(..., min_length=1, description="Return dated on each row")
    maturities: Tuple[int, ...] = Field(..., min_length=1)
    vols: Tuple[Tuple[Optional[float], ...], ...]
    sparse_maturities: Tuple[int, ...] = Field(default=(), description="Maturities with too few joined observations")

    @model_validator(mode='after')
    def validate_alignment(self):
        if not _strictly_increasing(self.dates):
            raise ValueError("dates must be strictly increasing")
        if len(self.returns) != len(self.dates) or len(self.vols) != len(self.dates):
            raise ValueError("every date needs a return and a vol row")
        if not _all_finite(self.returns):
            raise ValueError("returns must be finite")
        if any(len(row) != len(self.maturities) for row in self.vols):
            raise ValueError("vol grid must have one column per maturity")
        return self

    def as_panel(self) -> ImpliedVolPanel:
        return ImpliedVolPanel(
            ticker=self.ticker,
            dates=self.dates,
            maturities=self.maturities,
            vols=self.vols
        )

    def returns_array(self) -> np.ndarray:
        return np.asarray(self.returns, dtype=float)

    def column(self, maturity: int) -> np.ndarray:
        """Vol series for one maturity with NaN gaps."""
        idx = self.maturities.index(maturity)
        return np.array([np.nan if row[idx] is None else row[idx] for row in self.vols], dtype=float)

    model_config = ConfigDict(frozen=True)


# ============================================================================
# LEVERAGE FUNCTION AND SMILE THEORY
# ============================================================================

class LeverageFunction(BaseModel):
    """Leverage correlation function g_L on lags 0..max_lag."""
    lags: Tuple[int, ...] = Field(..., min_length=1, description="Lags 0..max_lag in trading days")
    values: Tuple[float, ...] = Field(..., min_length=1, description="g_L at each lag")
    std_errors: Optional[Tuple[float, ...]] = Field(None, description="Per-lag standard errors")
    sigma: float = Field(..., gt=0, description="Daily volatility used in the normalization")
    n_obs: int = Field(..., ge=0, description="Sample size (0 for analytic curves)")

    @field_validator('lags')
    @classmethod
    def validate_lags(cls, v):
        if tuple(v) != tuple(range(len(v))):
            raise ValueError("lags must be 0, 1, ..., max_lag")
        return v

    @model_validator(mode='after')
    def validate_values(self):
        if len(self.values) != len(self.lags):
            raise ValueError("one value per lag is required")
        if not _all_finite(self.values):
            raise ValueError("leverage values must be finite")
        if self.std_errors is not None:
            if len(self.std_errors) != len(self.lags):
                raise ValueError("one standard error per lag is required")
            errs = np.asarray(self.std_errors, dtype=float)
            if not np.all(np.isfinite(errs)) or np.any(errs < 0):
                raise ValueError("standard errors must be finite and non-negative")
        return self

    @property
    def max_lag(self) -> int:
        return len(self.lags) - 1

    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def std_error_array(self) -> Optional[np.ndarray]:
        if self.std_errors is None:
            return None
        return np.asarray(self.std_errors, dtype=float)

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "lags": [0, 1, 2],
                "values": [-0.1, -0.18, -0.16],
                "std_errors": [0.01, 0.01, 0.01],
                "sigma": 0.01,
                "n_obs": 2500
            }
        }
    )


class VolTermStructure(BaseModel):
    """ATM implied vol per maturity, daily units."""
    maturities: Tuple[int, ...] = Field(..., min_length=1)
    vols: Tuple[float, ...] = Field(..., min_length=1)

    @field_validator('maturities')
    @classmethod
    def validate_maturities(cls, v):
        if any(m < 1 for m in v) or not _strictly_increasing(v):
            raise ValueError("maturities must be positive and strictly increasing")
        return v

    @model_validator(mode='after')
    def validate_vols(self):
        if len(self.vols) != len(self.maturities):
            raise ValueError("one vol per maturity is required")
        arr = np.asarray(self.vols, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("vols must be finite and positive")
        return self

    @classmethod
    def flat(cls, maturities: Sequence[int], vol: float) -> "VolTermStructure":
        return cls(maturities=tuple(int(m) for m in maturities), vols=tuple(float(vol) for _ in maturities))

    def vol_array(self) -> np.ndarray:
        return np.asarray(self.vols, dtype=float)

    model_config = ConfigDict(frozen=True)


class GammaCurve(BaseModel):
    """Implied leverage coefficient gamma(T) per maturity."""
    maturities: Tuple[int, ...] = Field(default=())
    gammas: Tuple[float, ...] = Field(default=())
    std_errors: Optional[Tuple[float, ...]] = None
    kind: GammaKind

    @field_validator('maturities')
    @classmethod
    def validate_maturities(cls, v):
        if any(m < 1 for m in v) or not _strictly_increasing(v):
            raise ValueError("maturities must be positive and strictly increasing")
        return v

    @model_validator(mode='after')
    def validate_curve(self):
        if len(self.gammas) != len(self.maturities):
            raise ValueError("one gamma per maturity is required")
        if not _all_finite(self.gammas):
            raise ValueError("gammas must be finite")
        if self.std_errors is not None:
            if len(self.std_errors) != len(self.maturities):
                raise ValueError("one standard error per maturity is required")
            if any(not math.isfinite(e) or e < 0 for e in self.std_errors):
                raise ValueError("standard errors must be finite and non-negative")
        if self.kind == GammaKind.STICKY_DELTA and any(g != 0 for g in self.gammas):
            raise ValueError("sticky-delta gammas are identically zero")
        return self

    def gamma_at(self, maturity: int) -> float:
        return self.gammas[self.maturities.index(maturity)]

    def gamma_array(self) -> np.ndarray:
        return np.asarray(self.gammas, dtype=float)

    model_config = ConfigDict(frozen=True)


class SkewCurve(BaseModel):
    """ATM smile slope dSigma/dM per maturity."""
    maturities: Tuple[int, ...] = Field(..., min_length=1)
    skews: Tuple[float, ...] = Field(..., min_length=1)

    @model_validator(mode='after')
    def validate_curve(self):
        if any(m < 1 for m in self.maturities) or not _strictly_increasing(self.maturities):
            raise ValueError("maturities must be positive and strictly increasing")
        if len(self.skews) != len(self.maturities):
            raise ValueError("one skew per maturity is required")
        if not _all_finite(self.skews):
            raise ValueError("skews must be finite")
        return self

    model_config = ConfigDict(frozen=True)


class SmileSlice(BaseModel):
    """Quoted implied vols against log-moneyness M = ln(K/S) for one maturity."""
    maturity: int = Field(..., ge=1)
    moneyness_grid: Tuple[float, ...] = Field(..., min_length=2)
    vols: Tuple[float, ...] = Field(..., min_length=2)

    @field_validator('moneyness_grid')
    @classmethod
    def validate_grid(cls, v):
        if not _all_finite(v) or not _strictly_increasing(v):
            raise ValueError("moneyness grid must be finite and strictly increasing")
        return v

    @model_validator(mode='after')
    def validate_vols(self):
        if len(self.vols) != len(self.moneyness_grid):
            raise ValueError("one vol per grid point is required")
        if any(not math.isfinite(v) or v <= 0 for v in self.vols):
            raise ValueError("vols must be finite and positive")
        return self

    model_config = ConfigDict(frozen=True)


class AmplificationFit(BaseModel):
    """Least-squares scale factor between an empirical curve and a reference curve."""
    factor: float
    std_err: float = Field(..., ge=0)
    reference_kind: GammaKind

    model_config = ConfigDict(frozen=True)


# ============================================================================
# REGRESSIONS
# ============================================================================

class RegressionResult(BaseModel):
    """Per-ticker, per-maturity OLS of relative vol changes on returns."""
    ticker: str = Field(..., min_length=1, max_length=64)
    maturity: int = Field(..., ge=1)
    slope: float
    intercept: float
    std_err: float = Field(..., ge=0, description="Heteroskedasticity-robust SE of the slope")
    n_obs: int

    @field_validator('n_obs')
    @classmethod
    def validate_n_obs(cls, v):
        if v < settings.min_regression_obs:
            raise ValueError(f"at least {settings.min_regression_obs} observations are required")
        return v

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "ticker": "AAPL",
                "maturity": 20,
                "slope": -3.1,
                "intercept": 0.0002,
                "std_err": 0.2,
                "n_obs": 1200
            }
        }
    )


# ============================================================================
# SIMULATION
# ============================================================================

class Kernel(BaseModel):
    """Retarded-volatility kernel k(1..cutoff)."""
    form: KernelForm
    amplitude: float
    tau: Optional[float] = Field(None, gt=0, description="Timescale in days, or power-law exponent")
    cutoff: int = Field(..., ge=1, description="Longest lag in days")
    values: Tuple[float, ...] = Field(..., min_length=1, description="Materialized k(1..cutoff)")

    @model_validator(mode='after')
    def validate_values(self):
        if len(self.values) != self.cutoff:
            raise ValueError("kernel must have one value per lag 1..cutoff")
        if not _all_finite(self.values):
            raise ValueError("kernel values must be finite")
        return self

    @property
    def abs_sum(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def values_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    model_config = ConfigDict(frozen=True)


class SimConfig(BaseModel):
    """Monte Carlo configuration of the retarded-volatility process."""
    kernel: Kernel
    sigma_bar: float = Field(..., gt=0, description="Base daily volatility")
    n_days: int = Field(..., ge=1)
    seed: int = 42
    noise: NoiseKind = NoiseKind.GAUSSIAN
    vol_floor_frac: float = Field(0.1, gt=0, lt=1)

    @model_validator(mode='after')
    def validate_length(self):
        if self.n_days <= settings.warmup_multiple * self.kernel.cutoff:
            raise ValueError(
                f"n_days must exceed {settings.warmup_multiple} x kernel cutoff"
            )
        return self

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "kernel": {
                    "form": "exponential",
                    "amplitude": -0.1,
                    "tau": 10.0,
                    "cutoff": 2,
                    "values": [-0.0905, -0.0819]
                },
                "sigma_bar": 0.01,
                "n_days": 100000,
                "seed": 42
            }
        }
    )


class SimDiagnostics(BaseModel):
    """Bookkeeping of one simulated path."""
    n_steps: int = Field(..., ge=0)
    warmup: int = Field(..., ge=0)
    clamp_events: int = Field(..., ge=0)

    @property
    def clamp_fraction(self) -> float:
        return self.clamp_events / self.n_steps if self.n_steps else 0.0

    model_config = ConfigDict(frozen=True)


class OracleResult(BaseModel):
    """Forward realized-vol regression slope against the theoretical gamma."""
    maturity: int = Field(..., ge=1)
    slope: float
    std_err: float = Field(..., ge=0)
    theory_gamma: float
    n_obs: int = Field(0, ge=0)
    overlapping: bool = False

    model_config = ConfigDict(frozen=True)


# ============================================================================
# REPORTS
# ============================================================================

class CompareReport(BaseModel):
    """Gamma curves of every kind on a shared maturity grid, plus metadata."""
    maturities: Tuple[int, ...] = Field(..., min_length=1)
    curves: Dict[GammaKind, GammaCurve] = Field(default_factory=dict)
    absent: Tuple[GammaKind, ...] = Field(default=())
    metadata: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode='after')
    def validate_report(self):
        for kind, curve in self.curves.items():
            if curve.kind != kind:
                raise ValueError(f"curve stored under {kind.value} has kind {curve.kind.value}")
            if curve.maturities != self.maturities:
                raise ValueError(f"{kind.value} curve does not share the report maturities")
        for kind in GammaKind:
            if (kind in self.curves) == (kind in self.absent):
                raise ValueError(f"{kind.value} must be either present or marked absent")
        return self

    model_config = ConfigDict(frozen=True)


# ============================================================================
# HTTP SERVICE PAYLOADS
# ============================================================================

class LeverageRequest(BaseModel):
    """Request to estimate g_L from raw returns."""
    returns: List[float] = Field(..., min_length=2, description="Daily returns, oldest first")
    max_lag: int = Field(..., ge=1, le=1000)
    n_boot: Optional[int] = Field(None, ge=100, le=5000)
    block_len: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None


class TheoryRequest(BaseModel):
    """Request for theoretical gamma curves from a leverage function."""
    gl: LeverageFunction
    maturities: List[int] = Field(..., min_length=1)
    term: Optional[VolTermStructure] = None
    kind: TheoryKind = TheoryKind.BOTH


class BenchmarkRequest(BaseModel):
    """Request for the sticky-strike, sticky-delta and local-vol benchmarks."""
    term: VolTermStructure
    skew: Optional[SkewCurve] = None
    smiles: Optional[List[SmileSlice]] = None

    @model_validator(mode='after')
    def validate_source(self):
        if (self.skew is None) == (self.smiles is None):
            raise ValueError("provide exactly one of skew or smiles")
        return self


class BenchmarkResponse(BaseModel):
    """The three benchmark curves."""
    sticky_strike: GammaCurve
    sticky_delta: GammaCurve
    local_vol: GammaCurve


class OracleRequest(BaseModel):
    """Request to run the end-to-end Monte Carlo oracle."""
    config: SimConfig
    maturities: List[int] = Field(..., min_length=1, max_length=20)
    overlapping: bool = False
