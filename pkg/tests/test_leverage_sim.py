"""Tests for the retarded-volatility simulator and its oracles."""
import importlib
import logging
import sys

import numpy as np
import pytest

from implied_leverage.core.errors import LeverageError, SimulationError
from implied_leverage.models import GammaCurve, GammaKind, KernelForm, SimConfig, VolTermStructure
from implied_leverage.services import leverage_sim
from implied_leverage.services.leverage_estimator import bootstrap_errors, estimate_sigma
from implied_leverage.services.leverage_sim import (
    DEFAULT_SIM_VALUES,
    build_kernel,
    check_stability,
    forward_vol_slope,
    kernel_to_gl,
    run_oracle,
    sim_config_from_values,
    simulate,
    simulate_with_diagnostics,
    synthesize_vol_panel
)
from implied_leverage.services.smile_theory import flat_term_structure, gamma_moneyness
from tests.conftest import make_returns


def zero_kernel():
    return build_kernel(KernelForm.EXPONENTIAL, amplitude=0.0, tau=10.0, cutoff=2)


def zero_curve(maturities):
    return GammaCurve(
        maturities=tuple(maturities),
        gammas=tuple(0.0 for _ in maturities),
        kind=GammaKind.THEORY_MONEYNESS
    )


class TestBuildKernel:
    """Tests for build_kernel and check_stability."""

    def test_exponential(self):
        """Test k(tau) = A exp(-tau / tau0) on 1..cutoff."""
        kernel = build_kernel(KernelForm.EXPONENTIAL, amplitude=-0.1, tau=10.0, cutoff=2)
        assert kernel.cutoff == 2
        np.testing.assert_allclose(kernel.values, [-0.1 * np.exp(-0.1), -0.1 * np.exp(-0.2)], rtol=1e-15)

    def test_powerlaw(self):
        """Test tau is read as the exponent of a power law."""
        kernel = build_kernel(KernelForm.POWERLAW, amplitude=-0.1, tau=1.5, cutoff=3)
        np.testing.assert_allclose(kernel.values, [-0.1, -0.1 * 2 ** -1.5, -0.1 * 3 ** -1.5], rtol=1e-15)

    def test_table(self):
        """Test explicit values set the cutoff."""
        kernel = build_kernel(KernelForm.TABLE, table=[0.0, 0.0, 0.0, 0.0, -0.05])
        assert kernel.cutoff == 5
        assert kernel.values[-1] == -0.05

    def test_unstable_table(self):
        """Test sum |k| = 0.6 is refused."""
        with pytest.raises(SimulationError) as exc:
            build_kernel(KernelForm.TABLE, table=[0.3, -0.3])
        assert exc.value.code == "unstable-kernel"

    def test_unstable_is_a_leverage_error(self):
        """Test simulation errors share the library error type."""
        with pytest.raises(LeverageError):
            build_kernel(KernelForm.EXPONENTIAL, amplitude=-0.5, tau=10.0, cutoff=10)

    def test_stable_at_default(self):
        """Test the default kernel sits inside the stability margin."""
        kernel = build_kernel(KernelForm.EXPONENTIAL, amplitude=-0.1, tau=10.0, cutoff=2)
        check_stability(kernel)
        assert kernel.abs_sum == pytest.approx(0.1723568, abs=1e-6)

    def test_missing_tau(self):
        """Test parametric kernels need a positive tau."""
        with pytest.raises(LeverageError) as exc:
            build_kernel(KernelForm.EXPONENTIAL, amplitude=-0.1, tau=None, cutoff=2)
        assert exc.value.code == "invalid-parameter"

    def test_empty_table(self):
        """Test an empty table is rejected."""
        with pytest.raises(LeverageError) as exc:
            build_kernel(KernelForm.TABLE, table=[])
        assert exc.value.code == "invalid-parameter"


class TestSimulate:
    """Tests for simulate."""

    def test_deterministic(self):
        """Test the same seed gives bit-identical paths."""
        config = SimConfig(kernel=build_kernel(KernelForm.TABLE, table=[-0.1]), sigma_bar=0.01, n_days=5000, seed=3)
        assert simulate(config).returns == simulate(config).returns

    def test_seed_changes_path(self):
        """Test different seeds give different paths."""
        kernel = build_kernel(KernelForm.TABLE, table=[-0.1])
        first = simulate(SimConfig(kernel=kernel, sigma_bar=0.01, n_days=1000, seed=1))
        second = simulate(SimConfig(kernel=kernel, sigma_bar=0.01, n_days=1000, seed=2))
        assert first.returns != second.returns

    def test_day_tokens(self):
        """Test dates are zero-padded day indices."""
        series = simulate(SimConfig(kernel=zero_kernel(), sigma_bar=0.01, n_days=1000, seed=1))
        assert len(series) == 1000
        assert series.dates[0] == "000000"
        assert series.dates[-1] == "000999"
        assert series.ticker == "SIM"

    def test_zero_kernel_is_gaussian(self):
        """Test k = 0 gives iid returns with sigma = sigma_bar."""
        n = 2 ** 16
        series = simulate(SimConfig(kernel=zero_kernel(), sigma_bar=0.01, n_days=n, seed=5))
        assert abs(estimate_sigma(series) - 0.01) < 3 * 0.01 / np.sqrt(2 * n)

    def test_warmup_discarded(self):
        """Test the warm-up is ten cutoffs long."""
        config = SimConfig(kernel=zero_kernel(), sigma_bar=0.01, n_days=500, seed=1)
        series, diagnostics = simulate_with_diagnostics(config)
        assert diagnostics.warmup == 20
        assert diagnostics.n_steps == 520
        assert diagnostics.clamp_events == 0
        assert len(series) == 500

    def test_excessive_clamping(self):
        """Test a kernel that keeps hitting the floor is refused."""
        config = SimConfig(
            kernel=build_kernel(KernelForm.TABLE, table=[0.49]),
            sigma_bar=0.01,
            n_days=10000,
            seed=1,
            vol_floor_frac=0.5
        )
        with pytest.raises(SimulationError) as exc:
            simulate(config)
        assert exc.value.code == "excessive-clamping"

    def test_too_short_for_warmup(self):
        """Test n_days must exceed the warm-up."""
        with pytest.raises(ValueError):
            SimConfig(kernel=zero_kernel(), sigma_bar=0.01, n_days=20)


class TestPurePythonFallback:
    """Tests for the simulator without numba."""

    def test_fallback_loop_matches(self, monkeypatch):
        """Test the undecorated loop reproduces the path when numba cannot be imported."""
        config = sim_config_from_values({"n_days": 2000, "seed": 3})
        expected = simulate(config)
        monkeypatch.setitem(sys.modules, "numba", None)
        try:
            fallback = importlib.reload(leverage_sim)
            assert not fallback.HAS_NUMBA
            assert fallback.jit(nopython=True, cache=True)(len) is len
            assert fallback._retarded_vol_loop_jit is fallback._retarded_vol_loop
            assert fallback.simulate(config).returns == pytest.approx(expected.returns, rel=1e-12)
        finally:
            monkeypatch.undo()
            importlib.reload(leverage_sim)


class TestKernelToGl:
    """Tests for kernel_to_gl."""

    def test_two_k(self):
        """Test k(5) = -0.05 gives g_L(5) = -0.10."""
        gl = kernel_to_gl(build_kernel(KernelForm.TABLE, table=[0.0, 0.0, 0.0, 0.0, -0.05]), 0.01, max_lag=10)
        assert gl.lags == tuple(range(11))
        assert gl.values[5] == pytest.approx(-0.10, abs=1e-15)
        assert gl.values[0] == 0.0
        assert all(v == 0.0 for v in gl.values[6:])
        assert gl.sigma == 0.01

    def test_extends_to_cutoff(self):
        """Test a short max_lag still covers the kernel."""
        gl = kernel_to_gl(build_kernel(KernelForm.TABLE, table=[-0.1, -0.05]), 0.01, max_lag=1)
        assert gl.max_lag == 2
        assert gl.values == (0.0, -0.2, -0.1)


class TestForwardVolSlope:
    """Tests for forward_vol_slope."""

    def test_iid_slope_is_zero(self, rng):
        """Test iid returns give a slope within three errors of zero."""
        returns = make_returns(0.01 * rng.standard_normal(100000))
        result = forward_vol_slope(returns, 5, zero_curve([5]))
        assert abs(result.slope) < 3 * result.std_err
        assert result.theory_gamma == 0.0
        assert result.n_obs == 19999

    def test_overlapping_windows(self, rng):
        """Test overlapping windows use every start."""
        returns = make_returns(0.01 * rng.standard_normal(100000))
        result = forward_vol_slope(returns, 5, zero_curve([5]), overlapping=True)
        assert result.n_obs == 99995
        assert result.overlapping

    def test_series_too_short(self):
        """Test fewer than 100 maturities of data are refused."""
        with pytest.raises(LeverageError) as exc:
            forward_vol_slope(make_returns(np.ones(499) * 0.01), 5, zero_curve([5]))
        assert exc.value.code == "series-too-short"

    def test_theory_without_maturity(self, rng):
        """Test the theory curve must cover the maturity."""
        returns = make_returns(0.01 * rng.standard_normal(5000))
        with pytest.raises(LeverageError) as exc:
            forward_vol_slope(returns, 20, zero_curve([5]))
        assert exc.value.code == "invalid-input"


class TestSynthesizeVolPanel:
    """Tests for synthesize_vol_panel."""

    def test_zero_gamma_is_constant(self, gaussian_returns, flat_term):
        """Test gamma = 0 without noise leaves every vol at its base."""
        panel = synthesize_vol_panel(gaussian_returns, zero_curve([5, 20, 60]), flat_term, 0.0, 1)
        assert panel.dates == gaussian_returns.dates
        assert panel.maturities == (5, 20, 60)
        assert all(row == (0.01, 0.01, 0.01) for row in panel.vols)

    def test_planted_factor(self, flat_term, planted_gamma):
        """Test one step moves the vol by (1 + gamma r)."""
        returns = make_returns([0.0, 0.01])
        panel = synthesize_vol_panel(returns, planted_gamma, flat_term, 0.0, 1)
        np.testing.assert_allclose(panel.vols[1], [0.01 * 0.95, 0.01 * 0.97, 0.01 * 0.99], rtol=1e-14)

    def test_floor(self, caplog):
        """Test vols never drop below the floor and floor events are logged."""
        caplog.set_level(logging.INFO)
        returns = make_returns([0.0] + [0.01] * 20)
        curve = GammaCurve(maturities=(20,), gammas=(-150.0,), kind=GammaKind.THEORY_MONEYNESS)
        panel = synthesize_vol_panel(returns, curve, VolTermStructure.flat([20], 0.01), 0.0, 1, floor_frac=0.1)
        assert min(row[0] for row in panel.vols) == pytest.approx(0.001)
        assert "floor events" in caplog.text

    def test_maturity_mismatch(self, gaussian_returns, flat_term):
        """Test curve and base maturities must agree."""
        with pytest.raises(LeverageError) as exc:
            synthesize_vol_panel(gaussian_returns, zero_curve([5, 20]), flat_term, 0.0, 1)
        assert exc.value.code == "maturity-mismatch"

    def test_negative_noise(self, gaussian_returns, flat_term, planted_gamma):
        """Test noise_sd must be non-negative."""
        with pytest.raises(LeverageError) as exc:
            synthesize_vol_panel(gaussian_returns, planted_gamma, flat_term, -0.1, 1)
        assert exc.value.code == "invalid-parameter"


class TestSimConfigFromValues:
    """Tests for sim_config_from_values."""

    def test_defaults(self):
        """Test an empty mapping gives the documented default."""
        config = sim_config_from_values({})
        assert config.n_days == DEFAULT_SIM_VALUES["n_days"]
        assert config.seed == 42
        assert config.kernel.form == KernelForm.EXPONENTIAL
        assert config.kernel.cutoff == 2
        assert config.sigma_bar == 0.01

    def test_string_overrides(self):
        """Test text values from a config file are parsed."""
        config = sim_config_from_values({"n_days": "5000", "kernel.amplitude": "-0.05", "seed": "7"})
        assert config.n_days == 5000
        assert config.seed == 7
        assert config.kernel.amplitude == -0.05

    def test_empty_values_keep_defaults(self):
        """Test None and empty strings are ignored."""
        config = sim_config_from_values({"n_days": None, "seed": ""})
        assert config.n_days == DEFAULT_SIM_VALUES["n_days"]

    def test_table(self):
        """Test a comma list implies the table form."""
        config = sim_config_from_values({"kernel.table": "0.1, -0.05", "n_days": "1000"})
        assert config.kernel.form == KernelForm.TABLE
        assert config.kernel.values == (0.1, -0.05)

    def test_unstable_table(self):
        """Test an unstable table keeps its own error code."""
        with pytest.raises(LeverageError) as exc:
            sim_config_from_values({"kernel.table": "0.3,-0.3"})
        assert exc.value.code == "unstable-kernel"

    def test_unknown_key(self):
        """Test unknown keys are named."""
        with pytest.raises(LeverageError) as exc:
            sim_config_from_values({"kernel.shape": "exponential"})
        assert exc.value.code == "invalid-parameter"
        assert "kernel.shape" in exc.value.message

    def test_bad_value(self):
        """Test a value that does not parse."""
        with pytest.raises(LeverageError) as exc:
            sim_config_from_values({"n_days": "many"})
        assert exc.value.code == "invalid-parameter"

    def test_bad_form(self):
        """Test an unknown kernel form."""
        with pytest.raises(LeverageError) as exc:
            sim_config_from_values({"kernel.form": "gamma"})
        assert exc.value.code == "invalid-parameter"


@pytest.mark.slow
class TestMonteCarloAcceptance:
    """Desk-scale checks of the estimator and the theory against the simulator."""

    MAX_LAG = 50

    def _estimate(self, config):
        returns = simulate(config)
        gl = bootstrap_errors(returns, max_lag=self.MAX_LAG, n_boot=100, block_len=100, seed=config.seed)
        return gl.values_array()[1:], gl.std_error_array()[1:]

    def test_estimator_recovers_two_k(self):
        """Test g_L lies within three errors of 2k on every kernel lag and on at least 48 of lags 1..50."""
        config = sim_config_from_values({})
        values, errors = self._estimate(config)
        expected = kernel_to_gl(config.kernel, config.sigma_bar, max_lag=self.MAX_LAG).values_array()[1:]
        kernel_lags = expected != 0
        assert kernel_lags.sum() == config.kernel.cutoff
        assert np.all(np.abs(values - expected)[kernel_lags] <= 3 * errors[kernel_lags])
        assert np.all(np.abs(values)[kernel_lags] > 3 * errors[kernel_lags])
        assert np.sum(np.abs(values - expected) <= 3 * errors) >= 48

    def test_amplitude_halving_is_linear(self):
        """Test halving the kernel halves g_L on every kernel lag and on at least 48 of lags 1..50."""
        full = sim_config_from_values({})
        half = sim_config_from_values({"kernel.amplitude": full.kernel.amplitude / 2})
        values_full, errors_full = self._estimate(full)
        values_half, errors_half = self._estimate(half)
        tolerance = 3 * np.sqrt((errors_full / 2) ** 2 + errors_half ** 2)
        kernel_lags = np.arange(1, self.MAX_LAG + 1) <= full.kernel.cutoff
        within = np.abs(values_full / 2 - values_half) <= tolerance
        assert np.all(within[kernel_lags])
        assert np.all(np.abs(values_half)[kernel_lags] > 3 * errors_half[kernel_lags])
        assert np.sum(within) >= 48

    def test_oracle_matches_theory(self):
        """Test the forward realized-vol slope agrees with gamma(T) at T = 5 and 20."""
        results = run_oracle(sim_config_from_values({}), [20, 5])
        assert [r.maturity for r in results] == [5, 20]
        for result in results:
            assert result.theory_gamma < 0
            assert abs(result.slope - result.theory_gamma) <= 3 * result.std_err

    def test_oracle_without_leverage(self):
        """Test k = 0 gives zero theory and a slope within three errors of it."""
        config = sim_config_from_values({"kernel.amplitude": "0"})
        for result in run_oracle(config, [5, 20]):
            assert result.theory_gamma == 0.0
            assert abs(result.slope) <= 3 * result.std_err

    def test_stride_one_agrees_with_stride_maturity(self):
        """Test overlapping and non-overlapping windows give the same slope within three combined errors."""
        config = sim_config_from_values({})
        returns = simulate(config)
        strided = run_oracle(config, [5, 20], returns=returns)
        overlapping = run_oracle(config, [5, 20], overlapping=True, returns=returns)
        for a, b in zip(strided, overlapping):
            assert a.maturity == b.maturity
            assert b.n_obs > a.n_obs
            assert abs(a.slope - b.slope) <= 3 * np.hypot(a.std_err, b.std_err)

    def test_zero_kernel_through_every_stage(self):
        """Test k = 0 keeps estimated g_L, predicted gamma and the realized slope all within three errors of 0."""
        config = sim_config_from_values({"kernel.amplitude": "0"})
        returns = simulate(config)
        gl = bootstrap_errors(returns, max_lag=self.MAX_LAG, n_boot=100, block_len=100, seed=config.seed)
        values, errors = gl.values_array()[1:], gl.std_error_array()[1:]
        assert np.sum(np.abs(values) <= 3 * errors) >= 48

        maturities = [5, 20]
        predicted = gamma_moneyness(gl, flat_term_structure(gl, maturities))
        for gamma, err in zip(predicted.gamma_array(), predicted.std_errors):
            assert abs(gamma) <= 3 * err
        for result in run_oracle(config, maturities, returns=returns):
            assert result.theory_gamma == 0.0
            assert abs(result.slope) <= 3 * result.std_err
