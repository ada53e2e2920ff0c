"""
Monte Carlo oracle for the leverage-to-smile chain.

Returns follow a linear retarded-volatility process

    sigma_t = sigma_bar * (1 + sum_{tau=1}^{L} k(tau) r_{t-tau} / sigma_bar)
    r_t     = sigma_t * eps_t,  eps_t iid N(0, 1)

whose leverage function is, to first order, g_L(l) = 2 k(l). The forward
realized-vol regression then has slope (1 / (2 sigma_bar T)) sum_u g_L(u),
the fixed-moneyness gamma(T).
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np

from implied_leverage.core.config import settings
from implied_leverage.core.errors import LeverageError, SimulationError
from implied_leverage.models.schemas import (
    GammaCurve,
    ImpliedVolPanel,
    Kernel,
    KernelForm,
    LeverageFunction,
    NoiseKind,
    OracleResult,
    ReturnSeries,
    SimConfig,
    SimDiagnostics,
    VolTermStructure
)
from implied_leverage.services.ols import robust_ols
from implied_leverage.services.smile_theory import gamma_moneyness

logger = logging.getLogger(__name__)

# Try to import numba for JIT compilation of the path loop
try:
    from numba import jit
    HAS_NUMBA = True
except ImportError:
    def jit(*args, **kwargs):
        def decorator(func):
            return func
        return decorator
    HAS_NUMBA = False
    logger.info("Numba not available. The simulator will run a pure Python loop.")


def _retarded_vol_loop(eps, kernel, sigma_bar, floor, out):
    """Fill ``out`` with returns; returns the number of clamped steps."""
    n = len(eps)
    cutoff = len(kernel)
    clamps = 0
    for t in range(n):
        sigma = sigma_bar
        for j in range(min(cutoff, t)):
            sigma += kernel[j] * out[t - 1 - j]
        if sigma < floor:
            sigma = floor
            clamps += 1
        out[t] = sigma * eps[t]
    return clamps


_retarded_vol_loop_jit = jit(nopython=True, cache=True)(_retarded_vol_loop)


def build_kernel(
    form: KernelForm,
    amplitude: float = 0.0,
    tau: Optional[float] = None,
    cutoff: Optional[int] = None,
    table: Optional[Sequence[float]] = None
) -> Kernel:
    """
    Materialize k(1..cutoff).

    exponential: k(tau) = A exp(-tau / tau0); powerlaw: k(tau) = A tau^(-alpha)
    with ``tau`` read as alpha; table: explicit values, cutoff = len(values).

    Raises:
        LeverageError: invalid-parameter; unstable-kernel
    """
    form = KernelForm(form)
    if form == KernelForm.TABLE:
        if not table:
            raise LeverageError("a table kernel needs at least one value", code="invalid-parameter")
        values = np.asarray(table, dtype=float)
        cutoff = values.size
    else:
        if tau is None or tau <= 0:
            raise LeverageError(f"{form.value} kernel needs a positive tau", code="invalid-parameter")
        if cutoff is None or cutoff < 1:
            raise LeverageError(f"{form.value} kernel needs a cutoff >= 1", code="invalid-parameter")
        lags = np.arange(1, cutoff + 1, dtype=float)
        if form == KernelForm.EXPONENTIAL:
            values = amplitude * np.exp(-lags / tau)
        else:
            values = amplitude * lags ** (-tau)

    kernel = Kernel(
        form=form,
        amplitude=float(amplitude if form != KernelForm.TABLE else values[0]),
        tau=tau if form != KernelForm.TABLE else None,
        cutoff=int(cutoff),
        values=tuple(values.tolist())
    )
    check_stability(kernel)
    return kernel


def check_stability(kernel: Kernel) -> None:
    """The linear feedback must satisfy sum |k| < kernel_stability_margin."""
    if kernel.abs_sum >= settings.kernel_stability_margin:
        raise SimulationError(
            f"sum |k| = {kernel.abs_sum:.4g} is not below {settings.kernel_stability_margin}",
            code="unstable-kernel"
        )


def _day_tokens(n: int) -> Tuple[str, ...]:
    width = max(6, len(str(n - 1)))
    return tuple(f"{i:0{width}d}" for i in range(n))


def simulate_with_diagnostics(config: SimConfig) -> Tuple[ReturnSeries, SimDiagnostics]:
    """
    Simulate one path; the first warmup_multiple * cutoff days are discarded.

    Raises:
        SimulationError: unstable-kernel, excessive-clamping
    """
    check_stability(config.kernel)
    warmup = settings.warmup_multiple * config.kernel.cutoff
    total = warmup + config.n_days
    rng = np.random.default_rng(config.seed)
    eps = rng.standard_normal(total)
    kernel = config.kernel.values_array()
    floor = config.vol_floor_frac * config.sigma_bar

    if HAS_NUMBA:
        out = np.zeros(total)
        clamps = int(_retarded_vol_loop_jit(eps, kernel, config.sigma_bar, floor, out))
    else:
        buffer = [0.0] * total
        clamps = _retarded_vol_loop(eps.tolist(), kernel.tolist(), config.sigma_bar, floor, buffer)
        out = np.asarray(buffer)

    diagnostics = SimDiagnostics(n_steps=total, warmup=warmup, clamp_events=clamps)
    logger.info(
        f"Simulated {config.n_days} days (seed {config.seed}, warm-up {warmup}): "
        f"{clamps} clamp events"
    )
    if diagnostics.clamp_fraction > settings.max_clamp_fraction:
        raise SimulationError(
            f"{clamps} of {total} steps hit the vol floor "
            f"(limit {settings.max_clamp_fraction:.2%})",
            code="excessive-clamping"
        )

    series = ReturnSeries(
        ticker="SIM",
        dates=_day_tokens(config.n_days),
        returns=tuple(out[warmup:].tolist())
    )
    return series, diagnostics


def simulate(config: SimConfig) -> ReturnSeries:
    """Simulated daily returns, deterministic for a fixed seed."""
    series, _ = simulate_with_diagnostics(config)
    return series


def kernel_to_gl(kernel: Kernel, sigma_bar: float, max_lag: Optional[int] = None) -> LeverageFunction:
    """
    First-order leverage function of the simulated process:
    g_L(0) = 0, g_L(l) = 2 k(l) for 1 <= l <= cutoff, 0 beyond.
    """
    check_stability(kernel)
    max_lag = max(kernel.cutoff, max_lag or 0)
    values = np.zeros(max_lag + 1)
    values[1:kernel.cutoff + 1] = 2.0 * kernel.values_array()
    return LeverageFunction(
        lags=tuple(range(max_lag + 1)),
        values=tuple(values.tolist()),
        sigma=sigma_bar,
        n_obs=0
    )


def forward_vol_slope(
    returns: ReturnSeries,
    maturity: int,
    theory: GammaCurve,
    overlapping: bool = False
) -> OracleResult:
    """
    Regress the relative forward realized vol on today's return.

    RV(t, T) = sqrt(mean(r_{t+1..t+T}^2)); y_t = RV / mean(RV) - 1; x_t = r_t.
    Windows do not overlap (stride T) unless ``overlapping`` is set.

    Raises:
        LeverageError: series-too-short, invalid-input
    """
    r = returns.as_array()
    if r.size < 100 * maturity:
        raise LeverageError(
            f"{r.size} returns are too few for maturity {maturity} (need {100 * maturity})",
            code="series-too-short"
        )
    if maturity not in theory.maturities:
        raise LeverageError(f"theory curve has no maturity {maturity}", code="invalid-input")

    cumulative = np.concatenate(([0.0], np.cumsum(r * r)))
    starts = np.arange(0, r.size - maturity, 1 if overlapping else maturity)
    realized = np.sqrt((cumulative[starts + maturity + 1] - cumulative[starts + 1]) / maturity)
    y = realized / realized.mean() - 1.0
    fit = robust_ols(r[starts], y)

    result = OracleResult(
        maturity=maturity,
        slope=fit.slope,
        std_err=fit.std_err,
        theory_gamma=theory.gamma_at(maturity),
        n_obs=fit.n_obs,
        overlapping=overlapping
    )
    logger.info(
        f"Oracle T={maturity}: slope {result.slope:.4g} +/- {result.std_err:.2g}, "
        f"theory {result.theory_gamma:.4g}"
    )
    return result


def run_oracle(
    config: SimConfig,
    maturities: Sequence[int],
    overlapping: bool = False,
    returns: Optional[ReturnSeries] = None
) -> List[OracleResult]:
    """
    simulate -> kernel_to_gl -> gamma_moneyness (flat Sigma = sigma_bar) ->
    forward_vol_slope, one result per maturity in ascending order.
    """
    maturities = sorted(set(int(m) for m in maturities))
    returns = simulate(config) if returns is None else returns
    gl = kernel_to_gl(config.kernel, config.sigma_bar, max_lag=maturities[-1])
    theory = gamma_moneyness(gl, VolTermStructure.flat(maturities, config.sigma_bar))
    with ThreadPoolExecutor(max_workers=max(1, len(maturities))) as pool:
        return list(pool.map(lambda m: forward_vol_slope(returns, m, theory, overlapping), maturities))


def synthesize_vol_panel(
    returns: ReturnSeries,
    gamma: GammaCurve,
    base_vols: VolTermStructure,
    noise_sd: float,
    seed: int,
    floor_frac: Optional[float] = None
) -> ImpliedVolPanel:
    """
    Implied-vol panel with a planted gamma(T):
    Sigma_t(T) = Sigma_{t-1}(T) (1 + gamma(T) r_t + eta_t), Sigma_0 = base,
    eta_t iid N(0, noise_sd^2), floored at floor_frac * base.

    Raises:
        LeverageError: maturity-mismatch, invalid-parameter
    """
    if gamma.maturities != base_vols.maturities:
        raise LeverageError(
            f"gamma maturities {list(gamma.maturities)} differ from base maturities {list(base_vols.maturities)}",
            code="maturity-mismatch"
        )
    if noise_sd < 0:
        raise LeverageError(f"noise_sd must be non-negative, got {noise_sd}", code="invalid-parameter")
    floor_frac = settings.panel_floor_frac if floor_frac is None else floor_frac

    r = returns.as_array()
    base = base_vols.vol_array()
    floor = floor_frac * base
    rng = np.random.default_rng(seed)
    eta = noise_sd * rng.standard_normal((r.size, base.size)) if noise_sd > 0 else np.zeros((r.size, base.size))
    factors = 1.0 + np.outer(r, gamma.gamma_array()) + eta
    factors[0] = 1.0

    floors = 0
    vols = base * np.cumprod(factors, axis=0)
    if np.any(vols < floor):
        # the floor breaks the product, walk the path step by step
        vols = np.empty_like(factors)
        vols[0] = base
        for t in range(1, r.size):
            step = vols[t - 1] * factors[t]
            hit = step < floor
            floors += int(hit.sum())
            vols[t] = np.where(hit, floor, step)
    if floors:
        logger.warning(f"Synthetic panel for {returns.ticker}: {floors} floor events")

    return ImpliedVolPanel(
        ticker=returns.ticker,
        dates=returns.dates,
        maturities=gamma.maturities,
        vols=tuple(tuple(row) for row in vols.tolist())
    )


SIM_CONFIG_KEYS = (
    "kernel.form",
    "kernel.amplitude",
    "kernel.tau",
    "kernel.cutoff",
    "kernel.table",
    "sigma_bar",
    "n_days",
    "seed",
    "vol_floor_frac",
    "noise"
)

DEFAULT_SIM_VALUES = {
    "kernel.form": "exponential",
    "kernel.amplitude": -0.1,
    "kernel.tau": 10.0,
    "kernel.cutoff": 2,
    "sigma_bar": 0.01,
    "n_days": 2 ** 20,
    "seed": 42,
    "noise": "gaussian"
}


def sim_config_from_values(values: Mapping[str, Any]) -> SimConfig:
    """
    Build a SimConfig from flat dotted keys layered over DEFAULT_SIM_VALUES.

    ``kernel.table`` is a comma-separated list of k(1..L) and implies the
    table form.

    Raises:
        LeverageError: invalid-parameter, unstable-kernel
    """
    unknown = sorted(set(values) - set(SIM_CONFIG_KEYS))
    if unknown:
        raise LeverageError(f"unknown simulation keys: {', '.join(unknown)}", code="invalid-parameter")
    merged = {**DEFAULT_SIM_VALUES, "vol_floor_frac": settings.vol_floor_frac}
    merged.update({k: v for k, v in values.items() if v is not None and v != ""})

    try:
        table = merged.get("kernel.table")
        if isinstance(table, str):
            table = [float(v) for v in table.split(",") if v.strip()]
        form = KernelForm.TABLE if table else KernelForm(str(merged["kernel.form"]).strip())
        kernel = build_kernel(
            form,
            amplitude=float(merged["kernel.amplitude"]),
            tau=float(merged["kernel.tau"]),
            cutoff=int(merged["kernel.cutoff"]),
            table=table
        )
        return SimConfig(
            kernel=kernel,
            sigma_bar=float(merged["sigma_bar"]),
            n_days=int(merged["n_days"]),
            seed=int(merged["seed"]),
            noise=NoiseKind(str(merged["noise"]).strip()),
            vol_floor_frac=float(merged["vol_floor_frac"])
        )
    except LeverageError:
        raise
    except (TypeError, ValueError) as e:
        raise LeverageError(f"invalid simulation config: {e}", code="invalid-parameter")
