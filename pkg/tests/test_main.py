"""Integration tests for main.py endpoints."""
import numpy as np
import pytest
from fastapi.testclient import TestClient

from implied_leverage import __version__
from implied_leverage.core import settings
from main import app


client = TestClient(app)


def zero_kernel_config(n_days=5000):
    return {
        "kernel": {"form": "table", "amplitude": 0.0, "cutoff": 1, "values": [0.0]},
        "sigma_bar": 0.01,
        "n_days": n_days,
        "seed": 1
    }


def constant_gl(value=-0.5, max_lag=20):
    return {
        "lags": list(range(max_lag + 1)),
        "values": [value] * (max_lag + 1),
        "sigma": 0.01,
        "n_obs": 1000
    }


class TestHealthEndpoint:
    """Tests for the health endpoint."""

    def test_health(self):
        """Test health endpoint returns status and version."""
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.json() == {"status": "healthy", "version": __version__}


class TestLeverageEndpoint:
    """Tests for /api/leverage."""

    def test_point_estimate(self):
        """Test a plain estimate has one value per lag and no errors."""
        returns = (0.01 * np.random.default_rng(1).standard_normal(300)).tolist()
        response = client.post("/api/leverage", json={"returns": returns, "max_lag": 10})
        assert response.status_code == 200
        data = response.json()
        assert data["lags"] == list(range(11))
        assert data["std_errors"] is None
        assert data["n_obs"] == 300

    def test_bootstrap(self):
        """Test n_boot adds error bars."""
        returns = (0.01 * np.random.default_rng(2).standard_normal(300)).tolist()
        response = client.post("/api/leverage", json={"returns": returns, "max_lag": 5, "n_boot": 100, "seed": 3})
        assert response.status_code == 200
        assert len(response.json()["std_errors"]) == 6

    def test_series_too_short(self):
        """Test a short series is a 400 with its code."""
        response = client.post("/api/leverage", json={"returns": [0.01, -0.01, 0.02], "max_lag": 5})
        assert response.status_code == 400
        assert response.json()["code"] == "series-too-short"

    def test_max_lag_zero(self):
        """Test payload validation errors are 400 invalid-input."""
        response = client.post("/api/leverage", json={"returns": [0.01, -0.01], "max_lag": 0})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid-input"

    def test_rate_limit(self):
        """Test requests beyond the per-minute limit are refused."""
        payload = {"returns": (0.01 * np.random.default_rng(4).standard_normal(100)).tolist(), "max_lag": 2}
        codes = [client.post("/api/leverage", json=payload).status_code
                 for _ in range(settings.max_requests_per_minute + 1)]
        assert codes[:-1] == [200] * settings.max_requests_per_minute
        assert codes[-1] == 429


class TestTheoryEndpoint:
    """Tests for /api/theory."""

    def test_constant_leverage(self):
        """Test g_L = -0.5 with flat 1% vol gives -25 and -12.5 at T = 20."""
        response = client.post("/api/theory", json={"gl": constant_gl(), "maturities": [20]})
        assert response.status_code == 200
        curves = {c["kind"]: c for c in response.json()}
        assert curves["theory_moneyness"]["gammas"][0] == pytest.approx(-25.0, rel=1e-12)
        assert curves["theory_strike"]["gammas"][0] == pytest.approx(-12.5, rel=1e-12)

    def test_single_kind(self):
        """Test kind=moneyness returns one curve."""
        response = client.post("/api/theory", json={"gl": constant_gl(), "maturities": [5, 20], "kind": "moneyness"})
        assert [c["kind"] for c in response.json()] == ["theory_moneyness"]

    def test_maturity_beyond_max_lag(self):
        """Test T above the largest lag is a 400."""
        response = client.post("/api/theory", json={"gl": constant_gl(max_lag=10), "maturities": [20]})
        assert response.status_code == 400
        assert response.json()["code"] == "maturity-exceeds-max-lag"

    def test_term_structure_mismatch(self):
        """Test a term structure without the maturity is a 400."""
        response = client.post("/api/theory", json={
            "gl": constant_gl(),
            "maturities": [5, 20],
            "term": {"maturities": [5], "vols": [0.01]}
        })
        assert response.status_code == 400
        assert response.json()["code"] == "maturity-mismatch"


class TestBenchmarksEndpoint:
    """Tests for /api/benchmarks."""

    def test_from_skew(self):
        """Test skew -0.05 at 1% vol gives sticky strike -5 and local vol -10."""
        response = client.post("/api/benchmarks", json={
            "term": {"maturities": [5], "vols": [0.01]},
            "skew": {"maturities": [5], "skews": [-0.05]}
        })
        assert response.status_code == 200
        data = response.json()
        assert data["sticky_strike"]["gammas"][0] == pytest.approx(-5.0, rel=1e-12)
        assert data["local_vol"]["gammas"][0] == pytest.approx(-10.0, rel=1e-12)
        assert data["sticky_delta"]["gammas"] == [0.0]

    def test_needs_a_source(self):
        """Test a request without skew or smiles is a 400."""
        response = client.post("/api/benchmarks", json={"term": {"maturities": [5], "vols": [0.01]}})
        assert response.status_code == 400
        assert response.json()["code"] == "invalid-input"


class TestOracleEndpoint:
    """Tests for /api/oracle."""

    def test_zero_kernel(self):
        """Test k = 0 gives zero theory and a slope within three errors."""
        response = client.post("/api/oracle", json={"config": zero_kernel_config(), "maturities": [5]})
        assert response.status_code == 200
        result = response.json()[0]
        assert result["maturity"] == 5
        assert result["theory_gamma"] == 0.0
        assert abs(result["slope"]) <= 3 * result["std_err"]

    def test_simulation_limit(self):
        """Test n_days above the service limit is refused."""
        response = client.post("/api/oracle", json={
            "config": zero_kernel_config(settings.api_max_sim_days + 1),
            "maturities": [5]
        })
        assert response.status_code == 400
        assert response.json()["code"] == "invalid-parameter"

    def test_unstable_kernel(self):
        """Test an unstable kernel is a 400."""
        config = zero_kernel_config()
        config["kernel"] = {"form": "table", "amplitude": 0.3, "cutoff": 2, "values": [0.3, -0.3]}
        response = client.post("/api/oracle", json={"config": config, "maturities": [5]})
        assert response.status_code == 400
        assert response.json()["code"] == "unstable-kernel"
