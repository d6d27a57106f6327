from __future__ import annotations

import math

import pytest
from fastapi.testclient import TestClient

from peresim.service import app

CONFIG = {
    "phases": {"dphi_bc": 2.5086, "dphi_ca": -0.2784, "dphi_ab": -2.2302},
    "source": {"p_in_w": 1.0, "t_a": 0.26, "t_b": 0.52, "t_c": 0.22},
    "protocol": {"n_cycles": 6, "samples_per_setting": 2},
    "seed": 12,
}


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def log_csv(client):
    response = client.post("/simulate", json={"config": CONFIG})
    assert response.status_code == 200
    return response.json()["log_csv"]


class TestHealthAndSchema:
    def test_health(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"

    def test_run_config_schema(self, client):
        schema = client.get("/run-config/schema").json()
        assert schema["title"] == "RunConfig"

    def test_benchmarks_listing(self, client):
        data = client.get("/benchmarks").json()
        assert set(data) == {"23C", "30C"}
        assert data["23C"]["tau"] == pytest.approx(2.20e-4)


class TestSimulate:
    def test_returns_parseable_log(self, client, log_csv):
        from peresim import parse_log

        log = parse_log(log_csv)
        assert len(log.cycle_indices) == 6

    def test_deterministic(self, client):
        a = client.post("/simulate", json={"config": CONFIG}).json()["log_csv"]
        b = client.post("/simulate", json={"config": CONFIG}).json()["log_csv"]
        assert a == b

    def test_seed_override(self, client, log_csv):
        other = client.post("/simulate", json={"config": CONFIG, "seed": 77}).json()
        assert other["log_csv"] != log_csv

    def test_invalid_config_is_422(self, client):
        bad = {"config": {"phases": {"dphi_bc": 0, "dphi_ca": 0, "dphi_ab": 0}}}
        assert client.post("/simulate", json=bad).status_code == 422

    def test_unknown_config_key_is_422(self, client):
        bad = {"config": dict(CONFIG, extra_knob=1)}
        assert client.post("/simulate", json=bad).status_code == 422


class TestAnalyze:
    def test_ideal_log_analysis(self, client, log_csv):
        data = client.post("/analyze", json={"log_csv": log_csv}).json()
        assert data["mean_f"] == pytest.approx(1.0, abs=1e-12)
        assert data["kappa"] == pytest.approx(0.0, abs=1e-12)
        assert len(data["per_cycle"]) == 6

    def test_malformed_log_is_422(self, client):
        response = client.post("/analyze", json={"log_csv": "bogus"})
        assert response.status_code == 422


class TestReconstruct:
    def test_benchmark_row(self, client):
        data = client.post(
            "/reconstruct", json={"alpha": -0.765, "beta": 0.941, "gamma": -0.664}
        ).json()
        assert data["corrected_terms"]["alpha"] == pytest.approx(-0.806, abs=1e-3)

    def test_out_of_range_is_422(self, client):
        response = client.post(
            "/reconstruct", json={"alpha": -1.5, "beta": 0.9, "gamma": -0.6}
        )
        assert response.status_code == 422


class TestBudgetEndpoint:
    def test_budget(self, client, log_csv):
        data = client.post(
            "/budget", json={"log_csv": log_csv, "config": CONFIG, "reference": "23C"}
        ).json()
        assert data["measured_delta_f"] == pytest.approx(0.0, abs=1e-12)
        assert data["reference"]["label"] == "23C"

    def test_unknown_reference_is_422(self, client, log_csv):
        response = client.post(
            "/budget", json={"log_csv": log_csv, "config": CONFIG, "reference": "40C"}
        )
        assert response.status_code == 422


class TestSweepEndpoint:
    def test_sweep(self, client):
        request = {
            "phases": CONFIG["phases"],
            "config": CONFIG,
            "tau": 2.2e-4,
            "n_points": 181,
        }
        data = client.post("/sweep-residual", json=request).json()
        assert len(data["phi_sh"]) == 181
        assert data["max_delta_f"] == pytest.approx(2.8e-2, rel=0.2)
        assert abs(abs(data["max_phi_sh"]) - math.pi) < 0.1


class TestFitEndpoint:
    def test_contrast_fit(self, client):
        from peresim.reference import CONTRAST_FIT_PARAMS, THERMALIZATION_PARAMS

        c, phi0, eta, kapc = CONTRAST_FIT_PARAMS
        dt = THERMALIZATION_PARAMS[1]
        alphas = [
            c * math.cos(phi0 + eta * dt * math.exp(-kapc * k)) for k in range(70)
        ]
        data = client.post(
            "/fit-contrast", json={"alphas": alphas, "delta_t": dt}
        ).json()
        assert data["contrast"]["c_alpha"] == pytest.approx(c, rel=1e-6)

    def test_missing_delta_t_is_422(self, client):
        response = client.post("/fit-contrast", json={"alphas": [0.1, 0.2, 0.3, 0.1, 0.0]})
        assert response.status_code == 422


class TestDomainErrors:
    def test_bad_convention_propagates_as_422(self, client):
        config = dict(CONFIG, imperfections={"crosstalk": {"convention": "sideways"}})
        request = {"phases": CONFIG["phases"], "config": config, "tau": 1e-4}
        response = client.post("/sweep-residual", json=request)
        assert response.status_code == 422
        assert "convention" in response.json()["detail"]


class TestMcEndpoint:
    def test_power_mode(self, client):
        request = {"mode": "power", "config": CONFIG, "sigma": 0.0032,
                   "n_samples": 5000, "seed": 1}
        data = client.post("/mc-fluct", json=request).json()
        assert data["sigma_f"] > 0
        assert data["n_samples"] == 5000

    def test_bad_mode_is_422(self, client):
        request = {"mode": "humidity", "config": CONFIG}
        assert client.post("/mc-fluct", json=request).status_code == 422
