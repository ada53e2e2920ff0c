"""
Generate a small synthetic data set for trying the CLI end to end.

Prices come from the retarded-volatility simulator, implied-vol panels are
planted with the theoretical fixed-moneyness gamma, and a skew curve, smile
quotes, a term structure and a tranche map are written next to them.
"""

from pathlib import Path

import numpy as np
import pandas as pd

from implied_leverage.core.config import settings
from implied_leverage.models.schemas import KernelForm, ReturnSeries, SimConfig, VolTermStructure
from implied_leverage.services import csv_io
from implied_leverage.services.leverage_sim import build_kernel, kernel_to_gl, simulate, synthesize_vol_panel
from implied_leverage.services.smile_theory import gamma_moneyness, theoretical_skew

MATURITIES = (5, 20, 60)
TICKERS = {"ALPHA": ("large", -0.08), "BETA": ("large", -0.12), "GAMMA": ("small", -0.05)}


def generate_sample_data(out_dir: str = "data/sample", n_days: int = 2520, seed: int = settings.seed):
    """Write prices, panels and theory inputs for every sample ticker."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dates = [d.strftime("%Y-%m-%d") for d in pd.bdate_range("2004-01-02", periods=n_days + 1)]

    for offset, (ticker, (tranche, amplitude)) in enumerate(TICKERS.items()):
        kernel = build_kernel(KernelForm.EXPONENTIAL, amplitude=amplitude, tau=10.0, cutoff=2)
        config = SimConfig(kernel=kernel, sigma_bar=0.01, n_days=n_days, seed=seed + offset)
        simulated = simulate(config)
        returns = ReturnSeries(ticker=ticker, dates=tuple(dates[1:]), returns=simulated.returns)

        prices = 100.0 * np.exp(np.concatenate(([0.0], np.cumsum(returns.as_array()))))
        csv_io.atomic_write(
            out / f"{ticker}.csv",
            csv_io.render_csv(csv_io.prices_frame(dates, prices.tolist()))
        )

        term = VolTermStructure.flat(MATURITIES, config.sigma_bar)
        gamma = gamma_moneyness(kernel_to_gl(kernel, config.sigma_bar, max_lag=MATURITIES[-1]), term)
        panel = synthesize_vol_panel(returns, gamma, term, noise_sd=0.002, seed=seed + offset)
        csv_io.write_vol_panel(panel, out / f"{ticker}_vols.csv")
        print(f"✅ {ticker}: {n_days} returns, planted gamma {[round(g, 3) for g in gamma.gammas]}")

    # Theory inputs shared by the examples
    gl = kernel_to_gl(build_kernel(KernelForm.EXPONENTIAL, amplitude=-0.1, tau=10.0, cutoff=2), 0.01, max_lag=60)
    term = VolTermStructure.flat(MATURITIES, 0.01)
    skew = theoretical_skew(gl, term)
    csv_io.atomic_write(out / "gl.csv", csv_io.render_csv(csv_io.leverage_frame(gl)))
    csv_io.atomic_write(
        out / "term_structure.csv",
        csv_io.render_csv(pd.DataFrame({"maturity_days": MATURITIES, "atm_vol": term.vols}))
    )
    csv_io.atomic_write(
        out / "skew.csv",
        csv_io.render_csv(pd.DataFrame({"maturity_days": MATURITIES, "skew": skew.skews}))
    )
    grid = (-0.1, -0.05, 0.0, 0.05, 0.1)
    smile_rows = [
        (m, k, vol + s * k + 0.02 * k * k)
        for m, vol, s in zip(MATURITIES, term.vols, skew.skews)
        for k in grid
    ]
    csv_io.atomic_write(
        out / "smiles.csv",
        csv_io.render_csv(pd.DataFrame(smile_rows, columns=["maturity_days", "moneyness", "vol"]))
    )
    csv_io.atomic_write(
        out / "tranches.csv",
        csv_io.render_csv(pd.DataFrame(
            [(ticker, tranche) for ticker, (tranche, _) in TICKERS.items()],
            columns=["ticker", "tranche"]
        ))
    )
    print(f"✅ Sample data written to {out}")


if __name__ == "__main__":
    generate_sample_data()
