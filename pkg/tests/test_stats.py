from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from peresim import (
    FluctuationSpec,
    ImperfectionSpec,
    MeasurementLog,
    autocorr_sem,
    decompose_fluctuations,
    filter_malfunctions,
    simulate_measurement,
)
from peresim.errors import DataError, DomainError


def _ar1(rho: float, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    eps = rng.normal(size=n)
    x = np.empty(n)
    x[0] = eps[0]
    for i in range(1, n):
        x[i] = rho * x[i - 1] + eps[i]
    return x


class TestAutocorrSem:
    def test_constant_series(self):
        s = autocorr_sem([2.5] * 100)
        assert s.corrected_sem == 0.0
        assert s.naive_sem == 0.0
        assert s.mean == 2.5

    def test_iid_ratio_near_one(self):
        x = np.random.default_rng(4).normal(size=10_000)
        s = autocorr_sem(x)
        assert 0.9 <= s.corrected_sem / s.naive_sem <= 1.1

    def test_ar1_effective_sample_size(self):
        x = _ar1(0.5, 100_000, seed=2)
        s = autocorr_sem(x)
        # analytic n_eff = n (1 - rho) / (1 + rho) gives a sqrt(3) inflation
        assert s.corrected_sem / s.naive_sem == pytest.approx(math.sqrt(3.0), rel=0.1)
        assert s.n_effective < x.size

    def test_anticorrelated_keeps_naive(self):
        x = np.array([1.0, -1.0] * 50)
        s = autocorr_sem(x)
        assert s.corrected_sem == s.naive_sem
        assert s.autocorr_cutoff_lag == 1

    def test_insufficient_data(self):
        with pytest.raises(DataError):
            autocorr_sem([1.0, 2.0, 3.0])

    def test_corrected_never_negative_and_neff_bounded(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x = rng.normal(size=int(rng.integers(8, 200)))
            s = autocorr_sem(x)
            assert s.corrected_sem >= 0.0
            assert s.n_effective <= x.size + 1e-9


def _clean_log(source, phases, n_cycles=30, sigma=0.0, seed=1) -> MeasurementLog:
    spec = ImperfectionSpec(fluctuations=FluctuationSpec(sigma_pin_rel=sigma))
    return simulate_measurement(source, phases, spec, n_cycles, 1, seed=seed)


class TestFilterMalfunctions:
    def test_noiseless_log_unchanged(self, source, corrected_23c):
        log = _clean_log(source, corrected_23c)
        filtered, report = filter_malfunctions(log)
        assert filtered == log
        assert report.dropped_cycles == ()

    def test_identical_records_never_trigger(self, source, corrected_23c):
        log = _clean_log(source, corrected_23c)
        filtered, report = filter_malfunctions(log, threshold=0.5)
        assert report.dropped_cycles == ()

    def test_gross_outlier_drops_its_cycle(self, source, corrected_23c):
        log = _clean_log(source, corrected_23c, sigma=0.003, seed=8)
        records = list(log.records)
        for i, rec in enumerate(records):
            if rec.cycle_index == 7 and rec.config.label == "AB":
                records[i] = replace(rec, mean_power=rec.mean_power * 100.0)
        bad = MeasurementLog(records=tuple(records))
        filtered, report = filter_malfunctions(bad)
        assert 7 in report.dropped_cycles
        assert 7 not in filtered.cycle_indices
        assert any("AB" in r for r in report.reasons[7])

    def test_idempotent(self, source, corrected_23c):
        log = _clean_log(source, corrected_23c, sigma=0.003, seed=3, n_cycles=50)
        records = list(log.records)
        for i, rec in enumerate(records):
            if rec.cycle_index in (2, 11) and rec.config.label == "C":
                records[i] = replace(rec, mean_power=rec.mean_power * 50.0)
        bad = MeasurementLog(records=tuple(records))
        once, report_once = filter_malfunctions(bad)
        twice, report_twice = filter_malfunctions(once)
        assert twice == once
        assert report_twice.dropped_cycles == ()

    def test_threshold_validation(self, source, corrected_23c):
        with pytest.raises(DomainError):
            filter_malfunctions(_clean_log(source, corrected_23c), threshold=0.0)


class TestDecomposeFluctuations:
    def test_constructed_independent_paths_give_zero_phase(self, corrected_23c):
        # build a log satisfying the propagation model exactly: single-path
        # powers fluctuate independently and the pair powers are formed from
        # those same draws, so the residual attributed to phase must vanish
        from peresim import MeasurementRecord, ShutterConfig

        rng = np.random.default_rng(6)
        n_cycles = 4000
        t = {"A": 0.26, "B": 0.52, "C": 0.22}
        cos = {
            "BC": math.cos(corrected_23c.dphi_bc),
            "CA": math.cos(corrected_23c.dphi_ca),
            "AB": math.cos(corrected_23c.dphi_ab),
        }
        sigma = 0.004
        records = []
        for cycle in range(n_cycles):
            p = {k: t[k] * (1.0 + sigma * rng.normal()) for k in "ABC"}
            powers = {
                "0": 0.0,
                "A": p["A"], "B": p["B"], "C": p["C"],
                "BC": p["B"] + p["C"] + 2 * math.sqrt(p["B"] * p["C"]) * cos["BC"],
                "CA": p["C"] + p["A"] + 2 * math.sqrt(p["C"] * p["A"]) * cos["CA"],
                "AB": p["A"] + p["B"] + 2 * math.sqrt(p["A"] * p["B"]) * cos["AB"],
                "ABC": 1.0,
            }
            for slot, (label, value) in enumerate(powers.items()):
                records.append(
                    MeasurementRecord(
                        cycle_index=cycle, config=ShutterConfig.from_label(label),
                        mean_power=value, std_power=0.0, n_samples=1,
                        housing_temp=23.0, input_power=1.0, timestamp=float(slot),
                    )
                )
        log = MeasurementLog(records=tuple(records))
        est = decompose_fluctuations(log, corrected_23c)
        for pair in ("BC", "CA", "AB"):
            measured_var = est.sigma_pair_measured[pair] ** 2
            residual_var = measured_var - est.sigma_pair_power[pair] ** 2
            # the variance estimate carries a sampling error of about
            # var * sqrt(2/n); the phase residual must stay below 3 of those
            sampling = measured_var * math.sqrt(2.0 / n_cycles)
            assert est.clamped[pair] or residual_var <= 3.0 * sampling

    def test_injected_phase_noise_recovered(self, source, corrected_23c):
        spec = ImperfectionSpec(
            fluctuations=FluctuationSpec(sigma_pin_rel=0.002, sigma_phase=0.05)
        )
        log = simulate_measurement(source, corrected_23c, spec, 400, 1, seed=10)
        est = decompose_fluctuations(log, corrected_23c)
        for pair in ("BC", "CA", "AB"):
            assert est.sigma_phase[pair] == pytest.approx(0.05, rel=0.15)

    def test_clamped_flag_on_overpredicted_power(self, source, corrected_23c):
        # pure multiplicative power noise overpredicts the destructive pair's
        # variance through the quadrature formula, which must clamp, not go
        # negative
        spec = ImperfectionSpec(fluctuations=FluctuationSpec(sigma_pin_rel=0.005))
        log = simulate_measurement(source, corrected_23c, spec, 300, 1, seed=9)
        est = decompose_fluctuations(log, corrected_23c)
        assert all(v >= 0.0 for v in est.sigma_phase.values() if not math.isinf(v))
        assert any(est.clamped.values())

    def test_relative_sigmas_scale_invariant(self, corrected_23c):
        src1 = __import__("peresim").SourceSpec(p_in=1.0, t_a=0.26, t_b=0.52, t_c=0.22)
        src2 = __import__("peresim").SourceSpec(p_in=7.0, t_a=0.26, t_b=0.52, t_c=0.22)
        spec = ImperfectionSpec(fluctuations=FluctuationSpec(sigma_pin_rel=0.004))
        log1 = simulate_measurement(src1, corrected_23c, spec, 100, 1, seed=5)
        log2 = simulate_measurement(src2, corrected_23c, spec, 100, 1, seed=5)
        est1 = decompose_fluctuations(log1, corrected_23c)
        est2 = decompose_fluctuations(log2, corrected_23c)
        for path in "ABC":
            assert est1.sigma_power_rel[path] == pytest.approx(
                est2.sigma_power_rel[path], rel=1e-9
            )
        for pair in ("BC", "CA", "AB"):
            assert est1.sigma_phase[pair] == pytest.approx(est2.sigma_phase[pair], rel=1e-9)

    def test_needs_two_cycles(self, source, corrected_23c):
        log = _clean_log(source, corrected_23c, n_cycles=1)
        with pytest.raises(DataError):
            decompose_fluctuations(log, corrected_23c)
