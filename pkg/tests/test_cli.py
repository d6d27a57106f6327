from __future__ import annotations

import json
import math

import numpy as np
import pytest

from peresim.cli import main

CONFIG = {
    "phases": {"dphi_bc": 2.5086, "dphi_ca": -0.2784, "dphi_ab": -2.2302},
    "source": {"p_in_w": 1.0, "t_a": 0.26, "t_b": 0.52, "t_c": 0.22, "p_dark_w": 2e-9},
    "imperfections": {
        "residual": {"tau": 2.2e-4, "phi_sh": 3.141592653589793},
        "fluctuations": {"sigma_pin_rel": 0.0032},
    },
    "protocol": {"n_cycles": 10, "samples_per_setting": 2},
    "seed": 4,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CONFIG), encoding="utf-8")
    return path


@pytest.fixture
def log_path(tmp_path, config_path):
    path = tmp_path / "log.csv"
    assert main(["simulate", "--config", str(config_path), "--out", str(path)]) == 0
    return path


class TestSimulate:
    def test_deterministic_outputs(self, tmp_path, config_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(config_path), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(config_path), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_log(self, tmp_path, config_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", str(config_path), "--out", str(a)])
        main(["simulate", "--config", str(config_path), "--out", str(b), "--seed", "5"])
        assert a.read_bytes() != b.read_bytes()

    def test_missing_config_fails(self, tmp_path):
        rc = main(["simulate", "--config", str(tmp_path / "none.json"),
                   "--out", str(tmp_path / "x.csv")])
        assert rc == 1


class TestAnalyze:
    def test_report_matches_library(self, tmp_path, log_path):
        report_path = tmp_path / "report.json"
        per_cycle = tmp_path / "cycles.csv"
        rc = main(["analyze", "--log", str(log_path), "--report", str(report_path),
                   "--per-cycle", str(per_cycle)])
        assert rc == 0
        data = json.loads(report_path.read_text())

        from peresim import analyze_log, read_log

        expected = analyze_log(read_log(log_path))
        assert data["mean_f"] == expected.mean_f
        assert data["kappa"] == expected.kappa
        assert len(data["per_cycle"]) == 10
        header = per_cycle.read_text().splitlines()[0]
        assert header == "cycle,f,epsilon_w,alpha,beta,gamma"

    def test_bad_log_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("nope\n", encoding="utf-8")
        assert main(["analyze", "--log", str(bad)]) == 1


class TestReconstruct:
    def test_benchmark_row(self, tmp_path, capsys):
        rc = main(["reconstruct", "--alpha", "-0.765", "--beta", "0.941",
                   "--gamma", "-0.664"])
        assert rc == 0
        data = json.loads(capsys.readouterr().out)
        assert data["corrected_terms"]["alpha"] == pytest.approx(-0.806, abs=1e-3)
        assert data["corrected_terms"]["beta"] == pytest.approx(0.961, abs=1e-3)
        assert data["corrected_terms"]["gamma"] == pytest.approx(-0.612, abs=1e-3)


class TestBudget:
    def test_budget_report(self, tmp_path, config_path, log_path, capsys):
        report_path = tmp_path / "budget.json"
        rc = main(["budget", "--log", str(log_path), "--config", str(config_path),
                   "--report", str(report_path), "--reference", "23C"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "residual light" in out
        data = json.loads(report_path.read_text())
        assert data["reference"]["label"] == "23C"
        assert set(data["entries"]) >= {"residual_light", "crosstalk"}


class TestSweepResidual:
    def test_curve_file(self, tmp_path, config_path):
        out = tmp_path / "curve.csv"
        rc = main(["sweep-residual", "--config", str(config_path), "--out", str(out),
                   "--points", "181"])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "phi_sh_rad,delta_f"
        assert len(lines) == 182
        values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert values[:, 0].min() == pytest.approx(-math.pi)
        assert values[:, 0].max() == pytest.approx(math.pi)


class TestFitContrast:
    def test_fit_from_csv(self, tmp_path, capsys):
        from peresim.reference import CONTRAST_FIT_PARAMS, THERMALIZATION_PARAMS

        t0, dt, kap = THERMALIZATION_PARAMS
        c, phi0, eta, kapc = CONTRAST_FIT_PARAMS
        k = np.arange(70)
        rows = ["cycle,alpha,housing_temp_c"]
        for i in k:
            alpha = c * math.cos(phi0 + eta * dt * math.exp(-kapc * i))
            temp = t0 + dt * math.exp(-kap * i)
            rows.append(f"{i},{alpha!r},{temp!r}")
        data_path = tmp_path / "contrast.csv"
        data_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        rc = main(["fit-contrast", "--data", str(data_path),
                   "--temp-column", "housing_temp_c"])
        assert rc == 0
        result = json.loads(capsys.readouterr().out)
        assert result["thermalization"]["kappa_th"] == pytest.approx(kap, rel=1e-6)
        assert result["contrast"]["c_alpha"] == pytest.approx(c, rel=1e-6)
        assert result["contrast"]["eta"] == pytest.approx(eta, rel=1e-6)

    def test_requires_delta_t(self, tmp_path):
        data_path = tmp_path / "alpha.csv"
        data_path.write_text("cycle,alpha\n0,0.1\n1,0.2\n2,0.1\n3,-0.1\n4,-0.2\n",
                             encoding="utf-8")
        assert main(["fit-contrast", "--data", str(data_path)]) == 1


class TestMcFluct:
    def test_power_mode(self, config_path, capsys):
        rc = main(["mc-fluct", "--config", str(config_path), "--mode", "power",
                   "--samples", "5000", "--seed", "2"])
        assert rc == 0
        data = json.loads(capsys.readouterr().out)
        assert data["sigma"] == 0.0032
        assert data["sigma_f"] > 0

    def test_matches_library(self, config_path, capsys):
        rc = main(["mc-fluct", "--config", str(config_path), "--mode", "phase",
                   "--sigma", "0.01", "--samples", "4000", "--seed", "3"])
        assert rc == 0
        data = json.loads(capsys.readouterr().out)

        from peresim import mc_phase_fluctuations
        from peresim.config import parse_config

        cfg = parse_config(CONFIG)
        source, phases, _ = cfg.domain_specs()
        expected = mc_phase_fluctuations(phases, source, 0.01, 4000, 3)
        assert data["delta_f"] == expected.delta_f
        assert data["sigma_f"] == expected.sigma_f


class TestUsage:
    def test_unknown_subcommand_exits_2(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_no_args_exits_2(self, capsys):
        assert main([]) == 2

    def test_unknown_flag_exits_2(self, config_path, capsys):
        assert main(["simulate", "--config", str(config_path), "--frob", "x"]) == 2
