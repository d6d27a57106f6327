"""Statistics for cycle series: autocorrelation-corrected errors, malfunction
filtering and the decomposition of measured fluctuations into power and phase
contributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PhasePoint
from .errors import DataError, DomainError
from .forward import CONFIG_LABELS, MeasurementLog

_PAIR_CONFIGS = (("BC", "B", "C", "dphi_bc"), ("CA", "C", "A", "dphi_ca"), ("AB", "A", "B", "dphi_ab"))


@dataclass(frozen=True)
class SeriesStats:
    """Mean of a series with naive and autocorrelation-corrected SEM."""

    mean: float
    naive_sem: float
    corrected_sem: float
    n_effective: float
    autocorr_cutoff_lag: int


@dataclass(frozen=True)
class FluctuationEstimates:
    """Per-path power sigmas (W) and per-pair phase sigmas (rad) of a log.

    `sigma_pair_measured` and `sigma_pair_power` are the measured two-path
    stds and their power-only predictions, both in watts; `sigma_phase` is
    the residual converted to radians. A clamped flag marks pairs whose
    measured variance fell below the power-only prediction.
    """

    sigma_power: dict[str, float]
    sigma_power_rel: dict[str, float]
    sigma_phase: dict[str, float]
    sigma_pair_measured: dict[str, float]
    sigma_pair_power: dict[str, float]
    clamped: dict[str, bool]


@dataclass(frozen=True)
class FilterReport:
    """Cycles dropped by the malfunction filter and why."""

    dropped_cycles: tuple[int, ...]
    reasons: dict[int, tuple[str, ...]]
    threshold: float


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased sample autocorrelation for lags 0..n-1, FFT based."""
    n = x.size
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n] / n
    return acov / acov[0]


def autocorr_sem(series) -> SeriesStats:
    """Standard error of the mean corrected for serial correlation.

    The correction factor is 1 + 2*sum_k (1 - k/n)*rho_k over the initial
    run of strictly positive autocorrelations; the sum is truncated at the
    first lag with rho <= 0, so uncorrelated or anticorrelated series keep
    the naive SEM.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DomainError("series must be one-dimensional")
    n = x.size
    if n < 8:
        raise DataError(f"need at least 8 points for the corrected SEM, got {n}")
    mean = float(x.mean())
    variance = float(x.var(ddof=1))
    if variance == 0.0:
        return SeriesStats(mean=mean, naive_sem=0.0, corrected_sem=0.0,
                           n_effective=float(n), autocorr_cutoff_lag=0)
    naive = math.sqrt(variance / n)
    rho = _autocorrelation(x)
    cutoff = 1
    while cutoff < n and rho[cutoff] > 0.0:
        cutoff += 1
    lags = np.arange(1, cutoff)
    correction = 1.0 + 2.0 * float(np.sum((1.0 - lags / n) * rho[1:cutoff]))
    corrected = naive * math.sqrt(correction)
    return SeriesStats(
        mean=mean,
        naive_sem=naive,
        corrected_sem=corrected,
        n_effective=n / correction,
        autocorr_cutoff_lag=cutoff,
    )


def _config_series(log: MeasurementLog) -> dict[str, np.ndarray]:
    series: dict[str, list[float]] = {label: [] for label in CONFIG_LABELS}
    for _, recs in log.cycles():
        for label in CONFIG_LABELS:
            series[label].append(recs[label].mean_power)
    return {label: np.asarray(vals) for label, vals in series.items()}


def _outlier_pass(log: MeasurementLog, threshold: float) -> dict[int, list[str]]:
    series = _config_series(log)
    cycle_ids = log.cycle_indices
    reasons: dict[int, list[str]] = {}
    for label, values in series.items():
        med = float(np.median(values))
        mad = float(np.median(np.abs(values - med)))
        if mad == 0.0:
            continue
        for cycle, value in zip(cycle_ids, values):
            deviation = abs(value - med)
            if deviation > threshold * mad:
                reasons.setdefault(cycle, []).append(
                    f"{label}: |{value:.6g} - {med:.6g}| = {deviation:.3g} > {threshold:g}*MAD"
                )
    return reasons


def filter_malfunctions(log: MeasurementLog, threshold: float = 5.0):
    """Drop whole cycles containing shutter-malfunction outliers.

    Per configuration, a robust center and scale (median, MAD) are computed
    over the cycle series; any record deviating by more than threshold*MAD
    marks its entire cycle for removal. Removal shifts the robust statistics,
    so passes repeat until no cycle triggers, which makes the filter
    idempotent. Configurations with zero MAD never trigger. Returns the
    filtered log and a report of dropped cycles.
    """
    if threshold <= 0.0:
        raise DomainError("threshold must be > 0")
    reasons: dict[int, tuple[str, ...]] = {}
    filtered = log
    while True:
        found = _outlier_pass(filtered, threshold)
        if not found:
            break
        if len(filtered.cycle_indices) <= len(found):
            raise DataError(
                f"malfunction filter would drop every remaining cycle "
                f"(threshold {threshold:g} too tight for this log)"
            )
        reasons.update({c: tuple(r) for c, r in found.items()})
        kept = tuple(rec for rec in filtered.records if rec.cycle_index not in found)
        filtered = MeasurementLog(records=kept, metadata=dict(log.metadata))
    report = FilterReport(
        dropped_cycles=tuple(sorted(reasons)),
        reasons=reasons,
        threshold=threshold,
    )
    return filtered, report


def _series_std(values: np.ndarray, window: int | None) -> float:
    """Global std, or the average of per-window stds for short-timescale noise."""
    if window is None or window >= values.size:
        return float(np.std(values, ddof=1))
    if window < 2:
        raise DomainError("window must be >= 2 samples")
    chunks = [values[i:i + window] for i in range(0, values.size - window + 1, window)]
    return float(np.mean([np.std(c, ddof=1) for c in chunks]))


def decompose_fluctuations(
    log: MeasurementLog,
    phases: PhasePoint,
    window: int | None = None,
) -> FluctuationEstimates:
    """Split measured two-path fluctuations into power and phase parts.

    Single-path series fluctuate only with the input power; their stds are
    propagated through the two-path interference expression to predict the
    power-driven part of each pair's variance. The remainder is attributed
    to phase noise, assuming power and phase fluctuate independently, and is
    converted to radians through the local phase sensitivity of the pair.
    `window` selects a windowed std (short-timescale) instead of the global
    one.
    """
    if len(log.cycle_indices) < 2:
        raise DataError("need at least 2 cycles to estimate fluctuations")
    series = _config_series(log)
    sigma_power: dict[str, float] = {}
    sigma_power_rel: dict[str, float] = {}
    means: dict[str, float] = {}
    for label in ("A", "B", "C"):
        values = series[label]
        means[label] = float(np.mean(values))
        sigma_power[label] = _series_std(values, window)
        if means[label] == 0.0:
            raise DataError(f"single-path series {label} has zero mean power")
        sigma_power_rel[label] = sigma_power[label] / means[label]

    sigma_phase: dict[str, float] = {}
    sigma_pair_measured: dict[str, float] = {}
    sigma_pair_power: dict[str, float] = {}
    clamped: dict[str, bool] = {}
    for pair, i, j, attr in _PAIR_CONFIGS:
        p_i, p_j = means[i], means[j]
        cos_ij = math.cos(getattr(phases, attr))
        s_i, s_j = sigma_power[i], sigma_power[j]
        power_var = (
            (math.sqrt(p_j / p_i) * cos_ij + 1.0) ** 2 * s_i ** 2
            + (math.sqrt(p_i / p_j) * cos_ij + 1.0) ** 2 * s_j ** 2
        )
        measured = _series_std(series[pair], window)
        residual_var = measured ** 2 - power_var
        clamp = residual_var < 0.0
        phase_var_w = max(0.0, residual_var)
        sensitivity = 2.0 * math.sqrt(p_i * p_j) * abs(math.sin(getattr(phases, attr)))
        if sensitivity == 0.0:
            rad = math.inf if phase_var_w > 0.0 else 0.0
        else:
            rad = math.sqrt(phase_var_w) / sensitivity
        sigma_phase[pair] = rad
        sigma_pair_measured[pair] = measured
        sigma_pair_power[pair] = math.sqrt(power_var)
        clamped[pair] = clamp
    return FluctuationEstimates(
        sigma_power=sigma_power,
        sigma_power_rel=sigma_power_rel,
        sigma_phase=sigma_phase,
        sigma_pair_measured=sigma_pair_measured,
        sigma_pair_power=sigma_pair_power,
        clamped=clamped,
    )
