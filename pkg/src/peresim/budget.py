"""Per-imperfection deviation calculators and the assembled error budget.

Each calculator answers one question: how far does a given instrument
imperfection push the Peres parameter away from 1 at a given point in phase
space. The budget report collects all of them next to the measured
deviation, with interval bounds where a model only constrains a range.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CyclePowers,
    InterferenceTerms,
    PeresResult,
    PhasePoint,
    interference_terms,
    peres_parameter,
    sorkin_epsilon,
    subtract_background,
)
from .errors import AnalysisError, DomainError, UsageError
from .forward import (
    ImperfectionSpec,
    MeasurementLog,
    NonlinearitySpec,
    PolarizationSpec,
    CrosstalkSpec,
    SourceSpec,
    invert_detector_response,
)
from .reference import Benchmark
from ._rng import mc_stream
from . import stats as _stats

THREADS_ENV_VAR = "PERES_BENCH_THREADS"

# sign of the dphi_dh shift applied to the (alpha, beta, gamma) arguments
_TERM_SHIFT_SIGNS = {
    "cancelling": (1.0, 0.0, -1.0),
    "comoving_plus": (1.0, 0.0, 1.0),
    "comoving_minus": (-1.0, 0.0, -1.0),
}

_PHASE_SIGNS = ("symmetric", "plus", "minus")


def max_workers() -> int:
    """Parallelism cap from PERES_BENCH_THREADS (0 or unset means auto)."""
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 0:
        raise DomainError(f"{THREADS_ENV_VAR} must be >= 0, got {value}")
    if value == 0:
        return min(4, os.cpu_count() or 1)
    return value


@dataclass(frozen=True)
class FluctuationMC:
    """Monte Carlo estimate of a fluctuation-driven deviation of F."""

    delta_f: float
    sigma_f: float
    n_samples: int
    n_resampled: int
    mc_error: float


@dataclass(frozen=True)
class SweepCurve:
    """Deviation of F versus the closed-shutter phase shift."""

    phi_sh: np.ndarray
    delta_f: np.ndarray
    max_delta_f: float
    max_phi_sh: float
    min_delta_f: float
    min_phi_sh: float
    tau: float
    phase_sign: str


@dataclass(frozen=True)
class TauEstimate:
    """Closed-state transmissivity estimated from measured backgrounds."""

    tau: float
    sem: float
    n_cycles_used: int
    excluded_cycles: tuple[int, ...]


@dataclass(frozen=True)
class CrosstalkInversion:
    """Crosstalk strength solving the measured Sorkin rate; all roots kept."""

    dphi_dh: float
    roots: tuple[float, ...]
    convention: str


@dataclass(frozen=True)
class BudgetEntry:
    name: str
    delta_f: float
    lower: float
    upper: float
    sigma_f: float | None = None
    note: str = ""


@dataclass(frozen=True)
class BudgetReport:
    """All modelled deviations of F side by side with the measured one."""

    entries: dict[str, BudgetEntry]
    total_lower: float
    total_upper: float
    measured_delta_f: float
    measured_sem: float
    tau_estimate: TauEstimate
    crosstalk_estimate: CrosstalkInversion
    reference: Benchmark | None = None

    def to_rows(self) -> list[dict]:
        rows = []
        for entry in self.entries.values():
            rows.append(
                {
                    "model": entry.name,
                    "delta_f": entry.delta_f,
                    "sigma_f": entry.sigma_f,
                    "lower": entry.lower,
                    "upper": entry.upper,
                    "note": entry.note,
                }
            )
        rows.append(
            {
                "model": "total",
                "delta_f": None,
                "sigma_f": None,
                "lower": self.total_lower,
                "upper": self.total_upper,
                "note": "componentwise sum of bounds",
            }
        )
        rows.append(
            {
                "model": "measured",
                "delta_f": self.measured_delta_f,
                "sigma_f": self.measured_sem,
                "lower": None,
                "upper": None,
                "note": "autocorrelation-corrected SEM",
            }
        )
        return rows

    def to_dict(self) -> dict:
        out = {
            "entries": {k: vars(e) for k, e in self.entries.items()},
            "total_lower": self.total_lower,
            "total_upper": self.total_upper,
            "measured_delta_f": self.measured_delta_f,
            "measured_sem": self.measured_sem,
            "tau_estimate": vars(self.tau_estimate),
            "crosstalk_estimate": {
                "dphi_dh": self.crosstalk_estimate.dphi_dh,
                "roots": list(self.crosstalk_estimate.roots),
                "convention": self.crosstalk_estimate.convention,
            },
        }
        if self.reference is not None:
            out["reference"] = {
                "label": self.reference.label,
                "measured_delta_f": self.reference.measured_delta_f,
                "measured_delta_f_sem": self.reference.measured_delta_f_sem,
                "measured_kappa": self.reference.measured_kappa,
                "measured_kappa_sem": self.reference.measured_kappa_sem,
            }
        return out

    def to_text(self) -> str:
        lines = ["error budget (deviation of F from 1)", ""]
        width = max(len(e.name) for e in self.entries.values())
        for entry in self.entries.values():
            span = f"[{entry.lower:+.3e}, {entry.upper:+.3e}]"
            sig = f"  sigma_F={entry.sigma_f:.3e}" if entry.sigma_f is not None else ""
            note = f"  ({entry.note})" if entry.note else ""
            lines.append(f"  {entry.name:<{width}}  {entry.delta_f:+.3e}  {span}{sig}{note}")
        lines.append("")
        lines.append(f"  total bounds     [{self.total_lower:+.3e}, {self.total_upper:+.3e}]")
        lines.append(
            f"  measured         {self.measured_delta_f:+.3e} +- {self.measured_sem:.1e}"
        )
        if self.reference is not None:
            ref = self.reference
            lines.append(
                f"  reference ({ref.label})  delta_F={ref.measured_delta_f:+.3e}"
                f" +- {ref.measured_delta_f_sem:.1e},"
                f" kappa={ref.measured_kappa:+.2e} +- {ref.measured_kappa_sem:.1e}"
            )
        return "\n".join(lines)


def apply_crosstalk(phases: PhasePoint, ct: CrosstalkSpec) -> InterferenceTerms:
    """Interference terms measured under phase crosstalk at a given point."""
    sa, sb, sc = _TERM_SHIFT_SIGNS[ct.convention]
    return InterferenceTerms(
        alpha=math.cos(phases.dphi_bc + sa * ct.dphi_dh),
        beta=math.cos(phases.dphi_ca + sb * ct.dphi_dh),
        gamma=math.cos(phases.dphi_ab + sc * ct.dphi_dh),
    )


def crosstalk_delta_f(phases: PhasePoint, ct: CrosstalkSpec) -> float:
    """Shift of the Peres parameter caused by crosstalk alone."""
    base = peres_parameter(phases.cosines()).f
    shifted = peres_parameter(apply_crosstalk(phases, ct)).f
    return shifted - base


def _epsilon_closed_form(
    phases: PhasePoint, source: SourceSpec, convention: str, d: float
) -> float:
    sa, sb, sc = _TERM_SHIFT_SIGNS[convention]
    t = {"A": source.t_a, "B": source.t_b, "C": source.t_c}
    total = 0.0
    for (i, j, base, sign) in (
        ("B", "C", phases.dphi_bc, sa),
        ("C", "A", phases.dphi_ca, sb),
        ("A", "B", phases.dphi_ab, sc),
    ):
        if sign == 0.0:
            continue
        total += math.sqrt(t[i] * t[j]) * (math.cos(base) - math.cos(base + sign * d))
    return 2.0 * source.p_in * total


def epsilon_from_crosstalk(phases: PhasePoint, source: SourceSpec, ct: CrosstalkSpec) -> float:
    """Closed-form Sorkin rate produced by crosstalk in the two-path settings.

    Crosstalk shifts only the two-path interference angles, so the Sorkin
    combination reduces to the difference between unshifted and shifted
    pairwise cross terms.
    """
    return _epsilon_closed_form(phases, source, ct.convention, ct.dphi_dh)


def crosstalk_from_epsilon(
    epsilon: float,
    phases: PhasePoint,
    source: SourceSpec,
    convention: str = "cancelling",
    scan_step: float = 1e-3,
) -> CrosstalkInversion:
    """Solve the crosstalk strength that produces a measured Sorkin rate.

    The closed form is scanned over (-pi, pi) for sign changes, each root is
    polished by bisection, and the root of smallest magnitude is returned
    (all roots are reported).
    """
    if convention not in _TERM_SHIFT_SIGNS:
        raise DomainError(f"unknown crosstalk convention {convention!r}")

    def g(d: float) -> float:
        return _epsilon_closed_form(phases, source, convention, d) - epsilon

    limit = math.pi - 1e-9
    n_steps = int(2.0 * limit / scan_step)
    grid = np.linspace(-limit, limit, n_steps + 1)
    values = np.array([g(float(d)) for d in grid])
    roots: list[float] = []
    for k in range(len(grid) - 1):
        lo, hi = float(grid[k]), float(grid[k + 1])
        glo, ghi = float(values[k]), float(values[k + 1])
        if glo == 0.0:
            roots.append(lo)
            continue
        if glo * ghi < 0.0:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                gm = g(mid)
                if gm == 0.0:
                    lo = hi = mid
                    break
                if glo * gm < 0.0:
                    hi, ghi = mid, gm
                else:
                    lo, glo = mid, gm
            roots.append(0.5 * (lo + hi))
    if float(values[-1]) == 0.0:
        roots.append(float(grid[-1]))
    deduped: list[float] = []
    for r in sorted(roots, key=abs):
        if all(abs(r - q) > 2.0 * scan_step for q in deduped):
            deduped.append(r)
    if not deduped:
        raise AnalysisError(
            f"no real crosstalk strength reproduces epsilon = {epsilon!r} "
            f"under the {convention} convention"
        )
    return CrosstalkInversion(dphi_dh=deduped[0], roots=tuple(deduped), convention=convention)


def contrast_deviation(terms: InterferenceTerms, delta_c: float) -> float:
    """Peres deviation from a uniform interference-contrast loss delta_c."""
    if not 0.0 <= delta_c <= 1.0:
        raise DomainError(f"delta_c must be in [0, 1], got {delta_c!r}")
    w = terms.product()
    return (
        2.0 * (w - 1.0) * delta_c
        - (4.0 * w - 1.0) * delta_c ** 2
        + 2.0 * w * delta_c ** 3
    )


def contrast_from_phase_noise(sigma_fast: float, n_samples: int = 100_000, seed: int = 0) -> float:
    """Interference contrast left by fast phase noise: mean cos of N(0, sigma^2).

    Converges to exp(-sigma^2 / 2) and is estimated around a fully
    constructive fringe, where noise can only reduce the power.
    """
    if sigma_fast < 0.0:
        raise DomainError("sigma_fast must be >= 0")
    if sigma_fast == 0.0:
        return 1.0
    rng = mc_stream(seed, series=11)
    return float(np.mean(np.cos(rng.normal(0.0, sigma_fast, size=n_samples))))


def _pair_sums(phases: PhasePoint, t: dict[str, float]) -> tuple[float, float, float]:
    s_bc = t["B"] + t["C"] + 2.0 * math.sqrt(t["B"] * t["C"]) * math.cos(phases.dphi_bc)
    s_ca = t["C"] + t["A"] + 2.0 * math.sqrt(t["C"] * t["A"]) * math.cos(phases.dphi_ca)
    s_ab = t["A"] + t["B"] + 2.0 * math.sqrt(t["A"] * t["B"]) * math.cos(phases.dphi_ab)
    return s_bc, s_ca, s_ab


def _peres_from_power_arrays(pa, pb, pc, pbc, pca, pab):
    alpha = (pbc - pb - pc) / (2.0 * np.sqrt(pb * pc))
    beta = (pca - pc - pa) / (2.0 * np.sqrt(pc * pa))
    gamma = (pab - pa - pb) / (2.0 * np.sqrt(pa * pb))
    return alpha ** 2 + beta ** 2 + gamma ** 2 - 2.0 * alpha * beta * gamma


def mc_power_fluctuations(
    phases: PhasePoint,
    source: SourceSpec,
    sigma_rel: float,
    n_samples: int = 100_000,
    seed: int = 0,
) -> FluctuationMC:
    """Monte Carlo deviation of F from independent per-setting input powers.

    Every one of the six relevant settings draws its own input power from
    N(p_in, (sigma_rel*p_in)^2); negative draws are rejected and redrawn
    (counted in the result).
    """
    if sigma_rel < 0.0:
        raise DomainError("sigma_rel must be >= 0")
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    if sigma_rel == 0.0:
        return FluctuationMC(0.0, 0.0, n_samples, 0, 0.0)
    rng = mc_stream(seed, series=1)
    draws = rng.normal(1.0, sigma_rel, size=(n_samples, 6))
    n_resampled = 0
    for _ in range(100):
        bad = draws <= 0.0
        n_bad = int(np.count_nonzero(bad))
        if n_bad == 0:
            break
        n_resampled += n_bad
        draws[bad] = rng.normal(1.0, sigma_rel, size=n_bad)
    else:
        raise AnalysisError("rejection sampling of positive powers did not terminate")
    t = {"A": source.t_a, "B": source.t_b, "C": source.t_c}
    s_bc, s_ca, s_ab = _pair_sums(phases, t)
    pin = source.p_in
    f = _peres_from_power_arrays(
        pa=pin * draws[:, 0] * t["A"],
        pb=pin * draws[:, 1] * t["B"],
        pc=pin * draws[:, 2] * t["C"],
        pbc=pin * draws[:, 3] * s_bc,
        pca=pin * draws[:, 4] * s_ca,
        pab=pin * draws[:, 5] * s_ab,
    )
    sigma_f = float(np.std(f, ddof=1))
    return FluctuationMC(
        delta_f=float(np.mean(f) - 1.0),
        sigma_f=sigma_f,
        n_samples=n_samples,
        n_resampled=n_resampled,
        mc_error=sigma_f / math.sqrt(n_samples),
    )


def mc_phase_fluctuations(
    phases: PhasePoint,
    source: SourceSpec,
    sigma_phase: float,
    n_samples: int = 100_000,
    seed: int = 0,
) -> FluctuationMC:
    """Monte Carlo deviation of F from independent per-setting pairwise phase noise."""
    if sigma_phase < 0.0:
        raise DomainError("sigma_phase must be >= 0")
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    if sigma_phase == 0.0:
        return FluctuationMC(0.0, 0.0, n_samples, 0, 0.0)
    rng = mc_stream(seed, series=2)
    deltas = rng.normal(0.0, sigma_phase, size=(n_samples, 3))
    alpha = np.cos(phases.dphi_bc + deltas[:, 0])
    beta = np.cos(phases.dphi_ca + deltas[:, 1])
    gamma = np.cos(phases.dphi_ab + deltas[:, 2])
    f = alpha ** 2 + beta ** 2 + gamma ** 2 - 2.0 * alpha * beta * gamma
    sigma_f = float(np.std(f, ddof=1))
    return FluctuationMC(
        delta_f=float(np.mean(f) - 1.0),
        sigma_f=sigma_f,
        n_samples=n_samples,
        n_resampled=0,
        mc_error=sigma_f / math.sqrt(n_samples),
    )


def _residual_config_power(
    open_paths: str,
    phases: PhasePoint,
    t: dict[str, float],
    tau: float,
    phi: np.ndarray,
) -> np.ndarray:
    """Residual-light power of one configuration over an array of phase shifts."""
    weights = {}
    offsets = {}
    for p in "ABC":
        if p in open_paths:
            weights[p] = t[p]
            offsets[p] = np.zeros_like(phi)
        else:
            weights[p] = tau * t[p]
            offsets[p] = -phi
    total = np.full_like(phi, sum(weights.values()))
    for i, j, base in (
        ("B", "C", phases.dphi_bc),
        ("C", "A", phases.dphi_ca),
        ("A", "B", phases.dphi_ab),
    ):
        w = math.sqrt(weights[i] * weights[j])
        if w == 0.0:
            continue
        total = total + 2.0 * w * np.cos(base + offsets[i] - offsets[j])
    return total


def _sweep_delta_f(
    phases: PhasePoint,
    t: dict[str, float],
    tau: float,
    phi: np.ndarray,
    phase_sign: str,
) -> np.ndarray:
    def pipeline(sign: float) -> dict[str, np.ndarray]:
        return {
            label: _residual_config_power(label if label != "0" else "", phases, t, tau, sign * phi)
            for label in ("0", "A", "B", "C", "AB", "BC", "CA")
        }

    if phase_sign == "symmetric":
        plus = pipeline(1.0)
        minus = pipeline(-1.0)
        powers = {k: 0.5 * (plus[k] + minus[k]) for k in plus}
    elif phase_sign == "plus":
        powers = pipeline(1.0)
    else:
        powers = pipeline(-1.0)
    background = powers["0"]
    sub = {k: v - background for k, v in powers.items()}
    f = _peres_from_power_arrays(
        pa=sub["A"], pb=sub["B"], pc=sub["C"],
        pbc=sub["BC"], pca=sub["CA"], pab=sub["AB"],
    )
    return f - 1.0


def _refine_extremum(phi: np.ndarray, values: np.ndarray, index: int, mode: str) -> tuple[float, float]:
    """Quadratic refinement through the extremum and its periodic neighbours."""
    n = values.size
    step = phi[1] - phi[0]
    # the grid includes both -pi and pi, so periodic wrapping skips the duplicate
    left = values[index - 1] if index > 0 else values[n - 2]
    mid = values[index]
    right = values[index + 1] if index < n - 1 else values[1]
    denom = left - 2.0 * mid + right
    if denom == 0.0:
        return float(phi[index]), float(mid)
    offset = 0.5 * (left - right) / denom
    offset = max(-1.0, min(1.0, offset))
    refined_phi = float(phi[index] + offset * step)
    refined_val = float(mid - 0.25 * (left - right) * offset)
    if (mode == "max" and refined_val < mid) or (mode == "min" and refined_val > mid):
        return float(phi[index]), float(mid)
    return refined_phi, refined_val


def residual_light_sweep(
    phases: PhasePoint,
    source: SourceSpec,
    tau: float,
    n_points: int = 721,
    phase_sign: str = "symmetric",
) -> SweepCurve:
    """Deviation of F versus the closed-shutter phase shift at fixed leakage.

    For each phase shift the residual-light powers of all configurations are
    pushed through the full analysis pipeline (background subtraction,
    interference terms, F). The sign of the closed-state phase shift is not
    identifiable from cycle data, so the default sweep averages the power
    model over both signs, which pins the extrema to phase shifts of 0 and
    pi; the single-sign curves are available via `phase_sign`.
    """
    if tau < 0.0:
        raise DomainError("tau must be >= 0")
    if n_points < 5:
        raise DomainError("n_points must be >= 5")
    if phase_sign not in _PHASE_SIGNS:
        raise DomainError(f"phase_sign must be one of {_PHASE_SIGNS}, got {phase_sign!r}")
    t = {"A": source.t_a, "B": source.t_b, "C": source.t_c}
    phi = np.linspace(-math.pi, math.pi, n_points)
    workers = max_workers()
    if workers > 1 and n_points >= 64:
        chunks = np.array_split(phi, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(lambda c: _sweep_delta_f(phases, t, tau, c, phase_sign), chunks)
            )
        delta_f = np.concatenate(parts)
    else:
        delta_f = _sweep_delta_f(phases, t, tau, phi, phase_sign)
    imax = int(np.argmax(delta_f))
    imin = int(np.argmin(delta_f))
    max_phi, max_val = _refine_extremum(phi, delta_f, imax, "max")
    min_phi, min_val = _refine_extremum(phi, delta_f, imin, "min")
    return SweepCurve(
        phi_sh=phi,
        delta_f=delta_f,
        max_delta_f=max_val,
        max_phi_sh=max_phi,
        min_delta_f=min_val,
        min_phi_sh=min_phi,
        tau=tau,
        phase_sign=phase_sign,
    )


def estimate_tau(
    cycles: list[CyclePowers],
    corrected: InterferenceTerms,
    p_dark: float,
) -> TauEstimate:
    """Estimate the closed-state transmissivity from measured backgrounds.

    Per cycle, the dark-referenced background is divided by the coherent
    combination of the dark-referenced single-path powers with the corrected
    interference terms. Cycles with a nonpositive denominator (or nonphysical
    single-path powers) are excluded and reported.
    """
    if not cycles:
        raise DomainError("need at least one cycle")
    values: list[float] = []
    excluded: list[int] = []
    for index, c in enumerate(cycles):
        if c.background_subtracted:
            raise UsageError("tau estimation needs raw (not background-subtracted) cycles")
        pa, pb, pc = c.pa - p_dark, c.pb - p_dark, c.pc - p_dark
        if min(pa, pb, pc) <= 0.0:
            excluded.append(index)
            continue
        denom = (
            pa + pb + pc
            + 2.0 * math.sqrt(pa * pb) * corrected.gamma
            + 2.0 * math.sqrt(pa * pc) * corrected.beta
            + 2.0 * math.sqrt(pb * pc) * corrected.alpha
        )
        if denom <= 0.0:
            excluded.append(index)
            continue
        values.append((c.p0 - p_dark) / denom)
    if not values:
        raise AnalysisError("no cycle yields a positive denominator for the tau estimate")
    if len(values) >= 8:
        series = _stats.autocorr_sem(values)
        mean, sem = series.mean, series.corrected_sem
    else:
        arr = np.asarray(values)
        mean = float(arr.mean())
        sem = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return TauEstimate(
        tau=mean, sem=sem, n_cycles_used=len(values), excluded_cycles=tuple(excluded)
    )


def polarization_f(
    terms_h: InterferenceTerms,
    terms_v: InterferenceTerms,
    splits: PolarizationSpec,
    source: SourceSpec,
) -> PeresResult:
    """Peres parameter of a detector summing both polarization components.

    Single-path and two-path powers are formed as incoherent sums of the H
    and V contributions (each with its own coherent cross term) and pushed
    through the standard term extraction. With the polarizer enabled only
    the H component is detected.
    """
    t = {"A": source.t_a, "B": source.t_b, "C": source.t_c}
    h = {"A": splits.h_fraction_a, "B": splits.h_fraction_b, "C": splits.h_fraction_c}
    pin = source.p_in

    def two_path(i: str, j: str, chi_h: float, chi_v: float) -> float:
        if splits.polarizer_enabled:
            return pin * (
                h[i] * t[i] + h[j] * t[j]
                + 2.0 * math.sqrt(h[i] * t[i] * h[j] * t[j]) * chi_h
            )
        p_h = (
            h[i] * t[i] + h[j] * t[j]
            + 2.0 * math.sqrt(h[i] * t[i] * h[j] * t[j]) * chi_h
        )
        v_i, v_j = 1.0 - h[i], 1.0 - h[j]
        p_v = (
            v_i * t[i] + v_j * t[j]
            + 2.0 * math.sqrt(v_i * t[i] * v_j * t[j]) * chi_v
        )
        return pin * (p_h + p_v)

    def single_path(i: str) -> float:
        if splits.polarizer_enabled:
            return pin * h[i] * t[i]
        return pin * t[i]

    powers = CyclePowers(
        p0=0.0,
        pa=single_path("A"),
        pb=single_path("B"),
        pc=single_path("C"),
        pbc=two_path("B", "C", terms_h.alpha, terms_v.alpha),
        pca=two_path("C", "A", terms_h.beta, terms_v.beta),
        pab=two_path("A", "B", terms_h.gamma, terms_v.gamma),
        pabc=0.0,
        background_subtracted=True,
    )
    return peres_parameter(interference_terms(powers))


def _cycle_f_values(log: MeasurementLog) -> list[float]:
    return [
        peres_parameter(interference_terms(subtract_background(c))).f
        for c in log.cycle_power_sets()
    ]


def correct_nonlinearity(
    log: MeasurementLog, nl: NonlinearitySpec
) -> tuple[MeasurementLog, float]:
    """Invert the detector response on every record and report the F shift.

    Returns the corrected log and the mean over cycles of
    F_corrected - F_raw. A linear detector returns the log unchanged and a
    shift of exactly zero.
    """
    if nl.is_linear:
        return log, 0.0
    corrected_records = []
    for rec in log.records:
        try:
            power = invert_detector_response(rec.mean_power, nl)
        except DomainError as exc:
            raise DomainError(
                f"cycle {rec.cycle_index} config {rec.config.label}: {exc}"
            ) from exc
        slope = 1.0 + 2.0 * nl.c2 * power + 3.0 * nl.c3 * power * power
        corrected_records.append(
            replace(rec, mean_power=power, std_power=rec.std_power / slope)
        )
    corrected_log = MeasurementLog(records=tuple(corrected_records), metadata=dict(log.metadata))
    f_raw = _cycle_f_values(log)
    f_corr = _cycle_f_values(corrected_log)
    delta_f = float(np.mean(np.asarray(f_corr) - np.asarray(f_raw)))
    return corrected_log, delta_f


def _interval(delta: float) -> tuple[float, float]:
    return (min(0.0, delta), max(0.0, delta))


def full_budget(
    log: MeasurementLog,
    source: SourceSpec,
    imperfections: ImperfectionSpec,
    corrected_point: PhasePoint,
    n_mc_samples: int = 100_000,
    seed: int = 0,
    sweep_points: int = 721,
    reference: Benchmark | None = None,
) -> BudgetReport:
    """Assemble the per-imperfection error budget for a measured log.

    Fluctuation entries are upper bounds (their other bound is 0), the
    nonlinearity, contrast and crosstalk entries are point estimates, and
    residual light contributes the full range of its phase-shift sweep. The
    totals are the componentwise sums of the entry bounds.
    """
    corrected_terms = corrected_point.cosines()
    entries: dict[str, BudgetEntry] = {}

    _, nl_delta = correct_nonlinearity(log, imperfections.nonlinearity)
    entries["nonlinearity"] = BudgetEntry(
        name="detector nonlinearity", delta_f=nl_delta,
        lower=nl_delta, upper=nl_delta,
    )

    power_mc = mc_power_fluctuations(
        corrected_point, source, imperfections.fluctuations.sigma_pin_rel,
        n_samples=n_mc_samples, seed=seed,
    )
    lo, hi = _interval(power_mc.delta_f)
    entries["power_fluct"] = BudgetEntry(
        name="power fluctuations", delta_f=power_mc.delta_f,
        lower=lo, upper=hi, sigma_f=power_mc.sigma_f, note="bound, other side 0",
    )

    phase_mc = mc_phase_fluctuations(
        corrected_point, source, imperfections.fluctuations.sigma_phase,
        n_samples=n_mc_samples, seed=seed,
    )
    lo, hi = _interval(phase_mc.delta_f)
    entries["phase_fluct"] = BudgetEntry(
        name="phase fluctuations", delta_f=phase_mc.delta_f,
        lower=lo, upper=hi, sigma_f=phase_mc.sigma_f, note="bound, other side 0",
    )

    delta_c = 1.0 - math.exp(-0.5 * imperfections.fluctuations.sigma_phase_fast ** 2)
    contrast_delta = contrast_deviation(corrected_terms, delta_c)
    entries["contrast"] = BudgetEntry(
        name="interference contrast", delta_f=contrast_delta,
        lower=contrast_delta, upper=contrast_delta,
    )

    cycles_sub = [subtract_background(c) for c in log.cycle_power_sets()]
    eps_values = [sorkin_epsilon(c) for c in cycles_sub]
    if len(eps_values) >= 8:
        eps_mean = _stats.autocorr_sem(eps_values).mean
    else:
        eps_mean = float(np.mean(eps_values))
    inversion = crosstalk_from_epsilon(
        eps_mean, corrected_point, source, convention=imperfections.crosstalk.convention
    )
    ct_delta = crosstalk_delta_f(
        corrected_point,
        CrosstalkSpec(dphi_dh=inversion.dphi_dh, convention=inversion.convention),
    )
    entries["crosstalk"] = BudgetEntry(
        name="crosstalk phase", delta_f=ct_delta, lower=ct_delta, upper=ct_delta,
        note=f"dphi_dh={inversion.dphi_dh:.3e} ({inversion.convention})",
    )

    tau_est = estimate_tau(log.cycle_power_sets(), corrected_terms, source.p_dark)
    sweep = residual_light_sweep(
        corrected_point, source, max(tau_est.tau, 0.0), n_points=sweep_points
    )
    entries["residual_light"] = BudgetEntry(
        name="residual light", delta_f=0.5 * (sweep.max_delta_f + sweep.min_delta_f),
        lower=sweep.min_delta_f, upper=sweep.max_delta_f,
        note=f"tau={tau_est.tau:.3e}, bounds over the phase-shift sweep",
    )

    f_values = _cycle_f_values(log)
    if len(f_values) >= 8:
        f_stats = _stats.autocorr_sem(f_values)
        measured, measured_sem = f_stats.mean - 1.0, f_stats.corrected_sem
    else:
        arr = np.asarray(f_values)
        measured = float(arr.mean()) - 1.0
        measured_sem = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0

    return BudgetReport(
        entries=entries,
        total_lower=sum(e.lower for e in entries.values()),
        total_upper=sum(e.upper for e in entries.values()),
        measured_delta_f=measured,
        measured_sem=measured_sem,
        tau_estimate=tau_est,
        crosstalk_estimate=inversion,
        reference=reference,
    )
