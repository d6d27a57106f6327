"""Orchestration shared by the CLI and the HTTP service.

Stateless functions that tie the library modules into the standard runs:
simulate a log from a config, analyze a log into per-cycle statistics,
assemble the error budget. The CLI and the service endpoints add transport
only, never computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import stats as _stats
from .budget import BudgetReport, full_budget
from .config import RunConfig
from .core import (
    InterferenceTerms,
    interference_terms,
    peres_parameter,
    sorkin_epsilon,
    sorkin_kappa,
    subtract_background,
)
from .forward import MeasurementLog, simulate_measurement
from .reconstruct import CorrectedPoint, correct_phase_point
from .reference import BENCHMARKS


@dataclass(frozen=True)
class CycleResult:
    cycle: int
    f: float
    epsilon: float
    terms: InterferenceTerms


@dataclass(frozen=True)
class AnalysisReport:
    """Per-cycle Peres/Sorkin results and their aggregates for one log."""

    cycles: tuple[CycleResult, ...]
    mean_f: float
    f_sem_naive: float
    f_sem_corrected: float
    mean_epsilon: float
    epsilon_sem_corrected: float
    kappa: float
    mean_terms: InterferenceTerms
    terms_std: tuple[float, float, float]
    corrected: CorrectedPoint
    corrected_f: float
    dropped_cycles: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "n_cycles": len(self.cycles),
            "mean_f": self.mean_f,
            "f_sem_naive": self.f_sem_naive,
            "f_sem_corrected": self.f_sem_corrected,
            "mean_epsilon_w": self.mean_epsilon,
            "epsilon_sem_corrected_w": self.epsilon_sem_corrected,
            "kappa": self.kappa,
            "mean_terms": {
                "alpha": self.mean_terms.alpha,
                "beta": self.mean_terms.beta,
                "gamma": self.mean_terms.gamma,
            },
            "terms_std": {
                "alpha": self.terms_std[0],
                "beta": self.terms_std[1],
                "gamma": self.terms_std[2],
            },
            "corrected": corrected_point_dict(self.corrected),
            "corrected_f": self.corrected_f,
            "dropped_cycles": list(self.dropped_cycles),
            "per_cycle": [
                {
                    "cycle": c.cycle,
                    "f": c.f,
                    "epsilon_w": c.epsilon,
                    "alpha": c.terms.alpha,
                    "beta": c.terms.beta,
                    "gamma": c.terms.gamma,
                }
                for c in self.cycles
            ],
        }


def corrected_point_dict(corrected: CorrectedPoint) -> dict:
    return {
        "point": {
            "dphi_bc": corrected.point.dphi_bc,
            "dphi_ca": corrected.point.dphi_ca,
            "dphi_ab": corrected.point.dphi_ab,
        },
        "plane_index": corrected.plane_index,
        "distance": corrected.distance,
        "chosen_candidate": corrected.chosen_candidate,
        "corrected_terms": {
            "alpha": corrected.corrected_terms.alpha,
            "beta": corrected.corrected_terms.beta,
            "gamma": corrected.corrected_terms.gamma,
        },
        "survivors": [
            {
                "candidate": s.index,
                "plane_index": s.plane_index,
                "distance": s.distance,
            }
            for s in corrected.survivors
        ],
        "clamped": corrected.clamped,
    }


def simulate_run(cfg: RunConfig, seed_override: int | None = None) -> MeasurementLog:
    """Simulate the measurement run described by a config."""
    source, phases, imperfections = cfg.domain_specs()
    seed = cfg.seed if seed_override is None else seed_override
    return simulate_measurement(
        source=source,
        phases=phases,
        spec=imperfections,
        n_cycles=cfg.protocol.n_cycles,
        samples_per_setting=cfg.protocol.samples_per_setting,
        seed=seed,
        setting_duration_s=cfg.protocol.setting_duration_s,
        housing_temp_c=cfg.protocol.housing_temp_c,
    )


def analyze_log(
    log: MeasurementLog, malfunction_threshold: float | None = None
) -> AnalysisReport:
    """Run the standard per-cycle analysis of a measurement log.

    Optionally filters shutter malfunctions first; reconstruction is applied
    to the cycle-averaged interference terms.
    """
    dropped: tuple[int, ...] = ()
    if malfunction_threshold is not None:
        log, report = _stats.filter_malfunctions(log, malfunction_threshold)
        dropped = report.dropped_cycles
    subtracted = [subtract_background(c) for c in log.cycle_power_sets()]
    cycle_ids = log.cycle_indices
    results = []
    for cycle, powers in zip(cycle_ids, subtracted):
        terms = interference_terms(powers)
        results.append(
            CycleResult(
                cycle=cycle,
                f=peres_parameter(terms).f,
                epsilon=sorkin_epsilon(powers),
                terms=terms,
            )
        )
    f_values = [r.f for r in results]
    eps_values = [r.epsilon for r in results]
    if len(f_values) >= 8:
        f_stats = _stats.autocorr_sem(f_values)
        eps_stats = _stats.autocorr_sem(eps_values)
        mean_f, f_naive, f_corr = f_stats.mean, f_stats.naive_sem, f_stats.corrected_sem
        mean_eps, eps_sem = eps_stats.mean, eps_stats.corrected_sem
    else:
        f_arr = np.asarray(f_values)
        eps_arr = np.asarray(eps_values)
        mean_f = float(f_arr.mean())
        f_naive = float(f_arr.std(ddof=1) / math.sqrt(f_arr.size)) if f_arr.size > 1 else 0.0
        f_corr = f_naive
        mean_eps = float(eps_arr.mean())
        eps_sem = float(eps_arr.std(ddof=1) / math.sqrt(eps_arr.size)) if eps_arr.size > 1 else 0.0
    kappa = sorkin_kappa(subtracted).kappa
    alpha = np.array([r.terms.alpha for r in results])
    beta = np.array([r.terms.beta for r in results])
    gamma = np.array([r.terms.gamma for r in results])
    mean_terms = InterferenceTerms(
        alpha=float(alpha.mean()), beta=float(beta.mean()), gamma=float(gamma.mean())
    )
    std = tuple(
        float(v.std(ddof=1)) if v.size > 1 else 0.0 for v in (alpha, beta, gamma)
    )
    corrected = correct_phase_point(mean_terms)
    return AnalysisReport(
        cycles=tuple(results),
        mean_f=mean_f,
        f_sem_naive=f_naive,
        f_sem_corrected=f_corr,
        mean_epsilon=mean_eps,
        epsilon_sem_corrected=eps_sem,
        kappa=kappa,
        mean_terms=mean_terms,
        terms_std=std,
        corrected=corrected,
        corrected_f=peres_parameter(corrected.corrected_terms).f,
        dropped_cycles=dropped,
    )


def budget_run(
    log: MeasurementLog,
    cfg: RunConfig,
    reference: str | None = None,
    seed_override: int | None = None,
) -> BudgetReport:
    """Assemble the error budget of a log under a config's imperfection model."""
    source, _, imperfections = cfg.domain_specs()
    analysis = analyze_log(log, cfg.analysis.malfunction_threshold_mad)
    bench = BENCHMARKS[reference] if reference is not None else None
    seed = cfg.seed if seed_override is None else seed_override
    return full_budget(
        log=log,
        source=source,
        imperfections=imperfections,
        corrected_point=analysis.corrected.point,
        n_mc_samples=cfg.analysis.mc_samples,
        seed=seed,
        sweep_points=cfg.analysis.sweep_points,
        reference=bench,
    )
