"""
Command-line interface.

    python -m implied_leverage estimate --prices spx.csv --max-lag 250 --bootstrap 500
    python -m implied_leverage predict --gl gl.csv --maturities 5,20,60 --kind both
    python -m implied_leverage regress --panel aapl_vols.csv --prices aapl.csv
    python -m implied_leverage simulate --config configs/default_sim.cfg --oracle 5,20
    python -m implied_leverage compare --synthetic --n-days 20000 --maturities 5,20

Every command writes CSV to ``--out`` (atomically) or to stdout. Failures are
reported on stderr as ``error: <code>: <message>`` with exit status 2 for
invalid input and 1 for anything unexpected.
"""

from functools import wraps
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import math
import sys

import click
from pydantic import ValidationError

from implied_leverage import __version__
from implied_leverage.core.config import settings
from implied_leverage.core.errors import LeverageError
from implied_leverage.models.schemas import (
    GammaCurve,
    GammaKind,
    LeverageFunction,
    ReturnKind,
    ReturnSeries,
    SkewCurve,
    TheoryKind,
    VolTermStructure
)
from implied_leverage.services import csv_io
from implied_leverage.services.implied_regression import (
    average_by_tranche,
    group_by_maturity,
    regress_panel,
    tranche_average
)
from implied_leverage.services.leverage_estimator import bootstrap_errors, estimate_leverage
from implied_leverage.services.leverage_sim import (
    run_oracle,
    sim_config_from_values,
    simulate,
    simulate_with_diagnostics,
    synthesize_vol_panel
)
from implied_leverage.services.market_data import (
    align,
    compute_returns,
    load_price_series,
    load_vol_panel,
    slice_dates
)
from implied_leverage.services.report import assemble_report, restrict_curve
from implied_leverage.services.smile_theory import (
    fit_amplification,
    flat_term_structure,
    gamma_local_vol,
    gamma_sticky_delta,
    gamma_sticky_strike,
    skew_curve_from_smiles,
    theoretical_skew,
    theory_curves
)

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

THEORY_KINDS = {
    TheoryKind.MONEYNESS: [GammaKind.THEORY_MONEYNESS],
    TheoryKind.STRIKE: [GammaKind.THEORY_STRIKE],
    TheoryKind.BOTH: [GammaKind.THEORY_MONEYNESS, GammaKind.THEORY_STRIKE]
}


def _configure_logging(level: Optional[str]) -> None:
    if level is None:
        level = "INFO" if settings.debug else settings.log_level
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True
    )


def _fail(code: str, message: str, status: int) -> None:
    click.echo(f"error: {code}: {' '.join(str(message).split())}", err=True)
    sys.exit(status)


def handle_errors(func):
    """Map library errors to single-line diagnostics and exit codes."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            first = e.errors()[0] if e.errors() else {"msg": str(e)}
            _fail("invalid-input", first["msg"], 2)
        except LeverageError as e:
            _fail(e.code, e.message, 2)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except Exception as e:
            logger.exception("Unexpected failure")
            _fail("internal", f"{type(e).__name__}: {e}", 1)
    return wrapper


def parse_maturities(text: str) -> List[int]:
    """Comma-separated positive integers, deduplicated and sorted."""
    try:
        values = [int(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise LeverageError(f"maturities must be comma-separated integers, got {text!r}", code="invalid-parameter")
    if not values or any(v < 1 for v in values):
        raise LeverageError(f"maturities must be positive integers, got {text!r}", code="invalid-parameter")
    return sorted(set(values))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        csv_io.atomic_write(out, text)
    else:
        click.echo(text, nl=False)


def _term_for(gl: LeverageFunction, maturities: Sequence[int], path: Optional[str]) -> VolTermStructure:
    """Term structure on ``maturities``: from a file, else flat at the historical sigma."""
    if path is None:
        return flat_term_structure(gl, maturities)
    term = csv_io.read_term_structure(path)
    missing = [m for m in maturities if m not in term.maturities]
    if missing:
        raise LeverageError(f"{path}: no ATM vol for maturities {missing}", code="maturity-mismatch")
    return VolTermStructure(
        maturities=tuple(maturities),
        vols=tuple(term.vols[term.maturities.index(m)] for m in maturities)
    )


def _leverage_from_returns(
    returns: ReturnSeries,
    max_lag: int,
    n_boot: Optional[int],
    block_len: Optional[int],
    seed: int,
    workers: Optional[int] = None
) -> LeverageFunction:
    if n_boot is not None:
        return bootstrap_errors(returns, max_lag, n_boot=n_boot, block_len=block_len, seed=seed, workers=workers)
    if block_len is not None:
        raise LeverageError("--block-len needs --bootstrap", code="invalid-parameter")
    return estimate_leverage(returns, max_lag)


def _load_returns(
    prices_path: str,
    date_column: str = "date",
    price_column: str = "close",
    return_kind: str = "log",
    ticker: Optional[str] = None
) -> ReturnSeries:
    prices = load_price_series(prices_path, date_column=date_column, price_column=price_column, ticker=ticker)
    return compute_returns(prices, ReturnKind(return_kind))


@click.group()
@click.version_option(__version__, prog_name="implied-leverage")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level (default from IMPLIED_LEVERAGE_LOG_LEVEL)")
def cli(log_level):
    """Leverage correlations and the implied-volatility response to returns."""
    _configure_logging(log_level)


# ============================================================================
# ESTIMATE
# ============================================================================

@cli.command()
@click.option("--prices", "prices_path", default=None, help="Price CSV with date and close columns")
@click.option("--returns", "returns_path", default=None, help="date_index,return CSV written by simulate")
@click.option("--max-lag", required=True, type=int, help="Largest lag in trading days")
@click.option("--bootstrap", "n_boot", type=int, default=None, help="Block-bootstrap replicates (omit for none)")
@click.option("--block-len", type=int, default=None, help="Bootstrap block length (default 2 x max-lag)")
@click.option("--seed", type=int, default=settings.seed, show_default=True, help="Bootstrap seed")
@click.option("--workers", type=int, default=None, help="Bootstrap worker threads")
@click.option("--date-column", default="date", show_default=True)
@click.option("--price-column", default="close", show_default=True)
@click.option("--return-kind", type=click.Choice([k.value for k in ReturnKind]), default="log", show_default=True)
@click.option("--start", default=None, help="First return date kept (inclusive)")
@click.option("--end", default=None, help="Last return date kept (inclusive)")
@click.option("--annualize", is_flag=True, help="Show sigma annualized in the summary")
@click.option("--out", default=None, help="Output CSV (stdout when omitted)")
@handle_errors
def estimate(prices_path, returns_path, max_lag, n_boot, block_len, seed, workers, date_column, price_column,
             return_kind, start, end, annualize, out):
    """Estimate g_L(0..max_lag) from a price series or a simulated return series."""
    if (prices_path is None) == (returns_path is None):
        raise LeverageError("pass exactly one of --prices and --returns", code="invalid-input")
    if prices_path is not None:
        returns = _load_returns(prices_path, date_column, price_column, return_kind)
    else:
        returns = csv_io.read_returns(returns_path)
    if start or end:
        returns = slice_dates(returns, start, end)
    gl = _leverage_from_returns(returns, max_lag, n_boot, block_len, seed, workers)
    _emit(csv_io.render_csv(csv_io.leverage_frame(gl)), out)

    sigma = gl.sigma * math.sqrt(settings.trading_days_per_year) if annualize else gl.sigma
    click.echo(
        f"{returns.ticker}: {gl.n_obs} returns {returns.dates[0]}..{returns.dates[-1]}, "
        f"sigma {csv_io.format_number(sigma)} ({'annualized' if annualize else 'daily'}), "
        f"g_L(1) {csv_io.format_number(gl.values[1])}",
        err=True
    )


# ============================================================================
# PREDICT
# ============================================================================

@cli.command()
@click.option("--gl", "gl_path", required=True, help="Leverage CSV written by estimate")
@click.option("--maturities", required=True, help="Comma-separated maturities in trading days")
@click.option("--term-structure", default=None, help="CSV maturity_days,atm_vol (default flat at sigma)")
@click.option("--kind", type=click.Choice([k.value for k in TheoryKind]), default="both", show_default=True)
@click.option("--out", default=None, help="Output CSV (stdout when omitted)")
@handle_errors
def predict(gl_path, maturities, term_structure, kind, out):
    """Theoretical gamma(T) curves from a leverage function."""
    gl = csv_io.read_leverage(gl_path)
    maturities = parse_maturities(maturities)
    term = _term_for(gl, maturities, term_structure)
    curves = theory_curves(gl, term, THEORY_KINDS[TheoryKind(kind)])
    _emit(csv_io.render_csv(csv_io.gamma_frame(curves)), out)


# ============================================================================
# REGRESS
# ============================================================================

@cli.command()
@click.option("--panel", "panel_paths", multiple=True, required=True, help="Vol panel CSV (repeatable)")
@click.option("--prices", "prices_paths", multiple=True, required=True, help="Price CSV paired with each --panel")
@click.option("--price-column", default="close", show_default=True)
@click.option("--clip", type=float, default=None, help="Clip vol changes to [q, 1-q] quantiles")
@click.option("--tranche-map", default=None, help="CSV ticker,tranche")
@click.option("--tranche-out", default=None, help="Tranche-averaged gamma CSV")
@click.option("--out", default=None, help="Per-ticker regression CSV (stdout when omitted)")
@handle_errors
def regress(panel_paths, prices_paths, price_column, clip, tranche_map, tranche_out, out):
    """Empirical gamma(T) by regressing relative ATM vol changes on returns."""
    if len(panel_paths) != len(prices_paths):
        raise LeverageError(
            f"{len(panel_paths)} --panel files but {len(prices_paths)} --prices files",
            code="invalid-input"
        )
    results = []
    for panel_path, prices_path in zip(panel_paths, prices_paths):
        panel = load_vol_panel(panel_path)
        returns = _load_returns(prices_path, price_column=price_column, ticker=panel.ticker)
        results.extend(regress_panel(align(panel, returns), clip=clip))
    if not results:
        raise LeverageError("no maturity has enough observations to regress", code="insufficient-observations")

    tranche_text = None
    if tranche_out:
        if tranche_map:
            curves = average_by_tranche(results, csv_io.read_tranche_map(tranche_map))
        else:
            curves = {"": tranche_average(group_by_maturity(results))}
        tranche_text = csv_io.render_csv(csv_io.tranche_frame(curves))

    _emit(csv_io.render_csv(csv_io.regression_frame(results)), out)
    if tranche_text is not None:
        csv_io.atomic_write(tranche_out, tranche_text)


# ============================================================================
# SIMULATE
# ============================================================================

def _sim_values(config_path, overrides: Dict[str, object]) -> Dict[str, object]:
    """Defaults < config file < explicit flags."""
    values: Dict[str, object] = dict(csv_io.read_sim_config(config_path)) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return values


def sim_options(func):
    """Kernel and process flags shared by simulate and compare."""
    options = [
        click.option("--config", "config_path", default=None, help="Flat key=value simulation config"),
        click.option("--kernel-form", type=click.Choice(["exponential", "powerlaw"]), default=None),
        click.option("--amplitude", type=float, default=None, help="Kernel amplitude A"),
        click.option("--tau", type=float, default=None, help="Kernel timescale (power-law exponent)"),
        click.option("--cutoff", type=int, default=None, help="Kernel cutoff L in days"),
        click.option("--kernel-table", default=None, help="Comma-separated k(1..L)"),
        click.option("--sigma-bar", type=float, default=None, help="Base daily vol"),
        click.option("--n-days", type=int, default=None, help="Simulated days after warm-up"),
        click.option("--vol-floor-frac", type=float, default=None),
        click.option("--noise", type=click.Choice(["gaussian"]), default=None),
        click.option("--seed", type=int, default=None, help="Simulation seed (default 42)")
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _sim_config(config_path, kernel_form, amplitude, tau, cutoff, kernel_table, sigma_bar, n_days,
                vol_floor_frac, noise, seed):
    return sim_config_from_values(_sim_values(config_path, {
        "kernel.form": kernel_form,
        "kernel.amplitude": amplitude,
        "kernel.tau": tau,
        "kernel.cutoff": cutoff,
        "kernel.table": kernel_table,
        "sigma_bar": sigma_bar,
        "n_days": n_days,
        "vol_floor_frac": vol_floor_frac,
        "noise": noise,
        "seed": seed
    }))


@cli.command("simulate")
@sim_options
@click.option("--oracle", default=None, help="Comma-separated maturities for the forward-vol oracle")
@click.option("--overlapping", is_flag=True, help="Overlapping forward windows in the oracle")
@click.option("--returns-out", default=None, help="Simulated returns CSV")
@click.option("--oracle-out", default=None, help="Oracle CSV (stdout when omitted)")
@handle_errors
def simulate_command(config_path, kernel_form, amplitude, tau, cutoff, kernel_table, sigma_bar, n_days,
                     vol_floor_frac, noise, seed, oracle, overlapping, returns_out, oracle_out):
    """Simulate the retarded-volatility process and optionally run the oracle."""
    config = _sim_config(config_path, kernel_form, amplitude, tau, cutoff, kernel_table, sigma_bar,
                         n_days, vol_floor_frac, noise, seed)
    returns, diagnostics = simulate_with_diagnostics(config)
    returns_text = csv_io.render_csv(csv_io.returns_frame(returns))
    click.echo(
        f"{returns.ticker}: {len(returns)} days (seed {config.seed}, warm-up {diagnostics.warmup}), "
        f"{diagnostics.clamp_events} clamp events",
        err=True
    )

    if oracle:
        results = run_oracle(config, parse_maturities(oracle), overlapping=overlapping, returns=returns)
        oracle_text = csv_io.render_csv(csv_io.oracle_frame(results))
        if returns_out:
            csv_io.atomic_write(returns_out, returns_text)
        _emit(oracle_text, oracle_out)
    else:
        _emit(returns_text, returns_out)


# ============================================================================
# COMPARE
# ============================================================================

def _sticky_strike(skew_path, smile_path, gl, term) -> Tuple[GammaCurve, str]:
    if skew_path and smile_path:
        raise LeverageError("pass at most one of --skew and --smile", code="invalid-input")
    if skew_path:
        skew = csv_io.read_skew_curve(skew_path)
        missing = [m for m in term.maturities if m not in skew.maturities]
        if missing:
            raise LeverageError(f"{skew_path}: no skew for maturities {missing}", code="missing-prerequisite")
        skew = SkewCurve(
            maturities=term.maturities,
            skews=tuple(skew.skews[skew.maturities.index(m)] for m in term.maturities)
        )
        source = "skew-file"
    elif smile_path:
        skew = skew_curve_from_smiles(csv_io.read_smiles(smile_path), term)
        source = "smile-file"
    else:
        skew = theoretical_skew(gl, term)
        source = "theory"
    return gamma_sticky_strike(skew, term), source


def _amplification_lines(empirical: GammaCurve, references: Sequence[GammaCurve]) -> Dict[str, str]:
    lines = {}
    for reference in references:
        try:
            fit = fit_amplification(empirical, reference)
        except LeverageError as e:
            logger.info(f"No amplification fit against {reference.kind.value}: {e}")
            continue
        lines[f"amplification_{reference.kind.value}"] = (
            f"{csv_io.format_number(fit.factor)} +/- {csv_io.format_number(fit.std_err)}"
        )
    return lines


@cli.command()
@click.option("--gl", "gl_path", default=None, help="Leverage CSV written by estimate")
@click.option("--prices", "prices_path", default=None, help="Price CSV to estimate g_L from")
@click.option("--synthetic", is_flag=True, help="Simulate returns and plant a vol panel")
@sim_options
@click.option("--maturities", required=True, help="Comma-separated maturities in trading days")
@click.option("--max-lag", type=int, default=None, help="Largest lag (default: longest maturity)")
@click.option("--bootstrap", "n_boot", type=int, default=None, help="Block-bootstrap replicates")
@click.option("--block-len", type=int, default=None)
@click.option("--price-column", default="close", show_default=True)
@click.option("--term-structure", default=None, help="CSV maturity_days,atm_vol (default flat at sigma)")
@click.option("--skew", "skew_path", default=None, help="CSV maturity_days,skew")
@click.option("--smile", "smile_path", default=None, help="CSV maturity_days,moneyness,vol")
@click.option("--empirical", "empirical_path", default=None, help="Gamma CSV from regress --tranche-out")
@click.option("--tranche", default=None, help="Tranche to read from --empirical")
@click.option("--panel", "panel_path", default=None, help="Vol panel CSV regressed against --prices")
@click.option("--clip", type=float, default=None)
@click.option("--noise-sd", type=float, default=0.0, show_default=True, help="Noise of the planted panel")
@click.option("--out", default=None, help="Output CSV (stdout when omitted)")
@handle_errors
def compare(gl_path, prices_path, synthetic, config_path, kernel_form, amplitude, tau, cutoff, kernel_table,
            sigma_bar, n_days, vol_floor_frac, noise, seed, maturities, max_lag, n_boot, block_len,
            price_column, term_structure, skew_path, smile_path, empirical_path, tranche, panel_path,
            clip, noise_sd, out):
    """All gamma(T) curves on one maturity grid, long format, for plotting."""
    maturities = parse_maturities(maturities)
    max_lag = max_lag or maturities[-1]
    sources = [name for name, given in (("--gl", gl_path), ("--prices", prices_path), ("--synthetic", synthetic)) if given]
    if not sources:
        raise LeverageError("no leverage source: pass --gl, --prices or --synthetic", code="missing-prerequisite")
    if len(sources) > 1 and sources != ["--gl", "--prices"]:
        raise LeverageError(f"conflicting leverage sources {', '.join(sources)}", code="invalid-input")
    if panel_path and not prices_path:
        raise LeverageError("--panel needs --prices for the same-day returns", code="missing-prerequisite")
    if empirical_path and panel_path:
        raise LeverageError("pass at most one of --empirical and --panel", code="invalid-input")

    seed = settings.seed if seed is None else seed
    returns = None
    tickers: List[str] = []
    if synthetic:
        config = _sim_config(config_path, kernel_form, amplitude, tau, cutoff, kernel_table, sigma_bar,
                             n_days, vol_floor_frac, noise, seed)
        returns = simulate(config)
    elif prices_path:
        returns = _load_returns(prices_path, price_column=price_column)

    if gl_path:
        gl = csv_io.read_leverage(gl_path)
        gl_source = "file"
    else:
        gl = _leverage_from_returns(returns, max_lag, n_boot, block_len, seed)
        gl_source = "synthetic" if synthetic else "prices"
    if returns is not None:
        tickers.append(returns.ticker)

    term = _term_for(gl, maturities, term_structure)
    theory = theory_curves(gl, term, THEORY_KINDS[TheoryKind.BOTH])
    sticky, sticky_source = _sticky_strike(skew_path, smile_path, gl, term)
    curves = [*theory, sticky, gamma_sticky_delta(term.maturities), gamma_local_vol(sticky)]

    empirical = None
    empirical_source = "none"
    if empirical_path:
        found = csv_io.read_gamma_curves(empirical_path, tranche=tranche)
        if GammaKind.EMPIRICAL not in found:
            raise LeverageError(f"{empirical_path}: no empirical rows", code="missing-prerequisite")
        empirical = restrict_curve(found[GammaKind.EMPIRICAL], term.maturities)
        empirical_source = "file"
    elif panel_path or synthetic:
        if panel_path:
            panel = load_vol_panel(panel_path)
            empirical_source = "panel"
        else:
            panel = synthesize_vol_panel(returns, theory[0], term, noise_sd, seed)
            empirical_source = f"planted theory_moneyness, noise_sd {csv_io.format_number(noise_sd)}"
        results = regress_panel(align(panel, returns), clip=clip)
        if panel.ticker not in tickers:
            tickers.append(panel.ticker)
        grouped = group_by_maturity(results)
        missing = [m for m in term.maturities if m not in grouped]
        if missing:
            raise LeverageError(
                f"{panel.ticker}: too few observations to regress maturities {missing}",
                code="missing-prerequisite"
            )
        empirical = tranche_average({m: grouped[m] for m in term.maturities})

    metadata = {
        "tool_version": __version__,
        "seed": str(seed),
        "tickers": ",".join(tickers) or "-",
        "date_range": f"{returns.dates[0]}..{returns.dates[-1]}" if returns is not None else "-",
        "gl_source": gl_source,
        "sticky_strike_source": sticky_source,
        "empirical_source": empirical_source
    }
    if empirical is not None:
        curves.append(empirical)
        metadata.update(_amplification_lines(empirical, [theory[0], sticky]))

    report = assemble_report(term.maturities, curves, metadata)
    _emit(csv_io.render_compare(report), out)


def main():
    cli(prog_name="implied-leverage")


if __name__ == "__main__":
    main()
