"""Forward model of the three-path interferometer and the cycle simulator.

The detected power for a shutter configuration is evaluated as a pairwise
interference expansion: every path contributes a weight (its transmission,
scaled by the closed-state transmissivity when shuttered) and a phase offset
(the closed-state phase shift, plus crosstalk shifts imposed on open paths
by closed shutters). Cross terms between paths i and j enter as
2*sqrt(w_i*w_j)*cos(dphi_ij + o_i - o_j). For physical (plane-closing) phase
points this is identical to squaring the coherent amplitude sum; evaluating
the pairs directly keeps the pairwise cosines exact for arbitrary inputs.

Horizontal and vertical polarization components are summed incoherently,
each with its own phase set. Input-power and slow phase fluctuations perturb
one shutter setting at a time; fast phase noise reduces the interference
contrast of the cross terms. The detector response is applied last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import CyclePowers, PhasePoint
from .errors import ConfigurationError, DataError, DomainError, UsageError
from ._rng import setting_stream, permutation_stream

CONFIG_LABELS = ("0", "A", "B", "C", "AB", "BC", "CA", "ABC")
PATHS = ("A", "B", "C")

# ordered pairs (i, j) with their base phase difference dphi_ij = phi_i - phi_j
_PAIRS = (("B", "C", "dphi_bc"), ("C", "A", "dphi_ca"), ("A", "B", "dphi_ab"))

CROSSTALK_CONVENTIONS = ("cancelling", "comoving_plus", "comoving_minus")

# phase shift, in units of dphi_dh, imposed on the open path j by the closed
# shutter in path i. "cancelling" preserves the phase sum (mirror-symmetric
# crosstalk); the comoving variants shift the B-C and A-B differences by the
# same signed amount and therefore move the Peres parameter off 1.
_CROSSTALK_SHIFTS: dict[str, dict[tuple[str, str], float]] = {
    "cancelling": {
        ("A", "B"): 1.0, ("A", "C"): 0.0,
        ("B", "A"): 1.0, ("B", "C"): 1.0,
        ("C", "A"): 0.0, ("C", "B"): 1.0,
    },
    "comoving_plus": {
        ("A", "B"): 1.0, ("A", "C"): 0.0,
        ("B", "A"): 0.0, ("B", "C"): 0.0,
        ("C", "A"): 1.0, ("C", "B"): 0.0,
    },
    "comoving_minus": {
        ("A", "B"): -1.0, ("A", "C"): 0.0,
        ("B", "A"): 0.0, ("B", "C"): 0.0,
        ("C", "A"): -1.0, ("C", "B"): 0.0,
    },
}


@dataclass(frozen=True)
class ShutterConfig:
    """Open/closed state of the three path shutters."""

    open_a: bool
    open_b: bool
    open_c: bool

    @property
    def label(self) -> str:
        open_set = {p for p, o in zip(PATHS, (self.open_a, self.open_b, self.open_c)) if o}
        for label in CONFIG_LABELS:
            if open_set == (set(label) if label != "0" else set()):
                return label
        raise AssertionError("unreachable")

    @classmethod
    def from_label(cls, label: str) -> "ShutterConfig":
        if label not in CONFIG_LABELS:
            raise DomainError(f"unknown shutter configuration {label!r}")
        return cls("A" in label, "B" in label, "C" in label)

    def is_open(self, path: str) -> bool:
        return {"A": self.open_a, "B": self.open_b, "C": self.open_c}[path]

    def open_paths(self) -> tuple[str, ...]:
        return tuple(p for p in PATHS if self.is_open(p))

    def closed_paths(self) -> tuple[str, ...]:
        return tuple(p for p in PATHS if not self.is_open(p))


ALL_CONFIGS = tuple(ShutterConfig.from_label(label) for label in CONFIG_LABELS)


@dataclass(frozen=True)
class SourceSpec:
    """Input power, per-path transmissions to the detector and dark background."""

    p_in: float
    t_a: float
    t_b: float
    t_c: float
    p_dark: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p_in) and self.p_in > 0.0):
            raise DomainError(f"p_in must be > 0, got {self.p_in!r}")
        for name in ("t_a", "t_b", "t_c"):
            t = getattr(self, name)
            if not (math.isfinite(t) and 0.0 < t <= 1.0):
                raise DomainError(f"{name} must be in (0, 1], got {t!r}")
        if not (math.isfinite(self.p_dark) and self.p_dark >= 0.0):
            raise DomainError(f"p_dark must be >= 0, got {self.p_dark!r}")

    def transmission(self, path: str) -> float:
        return {"A": self.t_a, "B": self.t_b, "C": self.t_c}[path]


@dataclass(frozen=True)
class ResidualLightSpec:
    """Closed-state shutter transmissivity and the phase shift of the leaked light."""

    tau: float = 0.0
    phi_sh: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.tau) and 0.0 <= self.tau < 1.0):
            raise DomainError(f"tau must be in [0, 1), got {self.tau!r}")
        if not math.isfinite(self.phi_sh):
            raise DomainError(f"phi_sh must be finite, got {self.phi_sh!r}")


@dataclass(frozen=True)
class CrosstalkSpec:
    """Net phase shift closed shutters impose on open paths.

    Only the difference of the mirror-symmetric shift parameters is
    observable; `convention` selects how that difference is distributed over
    the B-C and A-B phase differences.
    """

    dphi_dh: float = 0.0
    convention: str = "cancelling"

    def __post_init__(self):
        if not (math.isfinite(self.dphi_dh) and abs(self.dphi_dh) < math.pi):
            raise DomainError(f"dphi_dh must satisfy |dphi_dh| < pi, got {self.dphi_dh!r}")
        if self.convention not in CROSSTALK_CONVENTIONS:
            raise DomainError(
                f"convention must be one of {CROSSTALK_CONVENTIONS}, got {self.convention!r}"
            )


@dataclass(frozen=True)
class FluctuationSpec:
    """Gaussian fluctuation magnitudes on the three relevant timescales.

    sigma_pin_rel: relative std of the input power, drawn once per shutter
    setting. sigma_phase: std in radians of each pairwise phase difference,
    drawn once per setting. sigma_phase_fast: phase noise within a setting,
    which degrades the interference contrast.
    """

    sigma_pin_rel: float = 0.0
    sigma_phase: float = 0.0
    sigma_phase_fast: float = 0.0

    def __post_init__(self):
        for name in ("sigma_pin_rel", "sigma_phase", "sigma_phase_fast"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be >= 0, got {v!r}")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Detector reading model r(P) = P * (1 + c2*P + c3*P^2).

    c2 is in 1/W and c3 in 1/W^2. The response must stay strictly increasing
    over the power range it is evaluated on.
    """

    c2: float = 0.0
    c3: float = 0.0

    def __post_init__(self):
        for name in ("c2", "c3"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def is_linear(self) -> bool:
        return self.c2 == 0.0 and self.c3 == 0.0


@dataclass(frozen=True)
class PolarizationSpec:
    """Horizontal/vertical power split per path and the V-component phase set.

    With all h fractions equal to 1 the model is single-polarization. With
    `polarizer_enabled` the detector sees only the H component regardless of
    the split.
    """

    h_fraction_a: float = 1.0
    h_fraction_b: float = 1.0
    h_fraction_c: float = 1.0
    phases_v: PhasePoint = field(default_factory=lambda: PhasePoint(0.0, 0.0, 0.0))
    polarizer_enabled: bool = False

    def __post_init__(self):
        for name in ("h_fraction_a", "h_fraction_b", "h_fraction_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise DomainError(f"{name} must be in [0, 1], got {v!r}")

    def h_fraction(self, path: str) -> float:
        return {"A": self.h_fraction_a, "B": self.h_fraction_b, "C": self.h_fraction_c}[path]

    @property
    def is_single_polarization(self) -> bool:
        return self.polarizer_enabled or (
            self.h_fraction_a == 1.0 and self.h_fraction_b == 1.0 and self.h_fraction_c == 1.0
        )


@dataclass(frozen=True)
class ImperfectionSpec:
    """Bundle of all instrument imperfections applied by the forward model."""

    residual: ResidualLightSpec = field(default_factory=ResidualLightSpec)
    crosstalk: CrosstalkSpec = field(default_factory=CrosstalkSpec)
    fluctuations: FluctuationSpec = field(default_factory=FluctuationSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    polarization: PolarizationSpec = field(default_factory=PolarizationSpec)

    @classmethod
    def disabled(cls) -> "ImperfectionSpec":
        return cls()


@dataclass(frozen=True)
class MeasurementRecord:
    """One shutter setting of one cycle, aggregated over its samples."""

    cycle_index: int
    config: ShutterConfig
    mean_power: float
    std_power: float
    n_samples: int
    housing_temp: float
    input_power: float
    timestamp: float

    def __post_init__(self):
        if self.cycle_index < 0:
            raise DomainError("cycle_index must be >= 0")
        if self.n_samples < 1:
            raise DomainError("n_samples must be >= 1")
        for name in ("mean_power", "std_power", "housing_temp", "input_power", "timestamp"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.std_power < 0.0:
            raise DomainError("std_power must be >= 0")


@dataclass(frozen=True)
class MeasurementLog:
    """Ordered measurement records; each cycle holds all eight settings once."""

    records: tuple[MeasurementRecord, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        seen: dict[int, set[str]] = {}
        for rec in self.records:
            labels = seen.setdefault(rec.cycle_index, set())
            if rec.config.label in labels:
                raise DataError(
                    f"cycle {rec.cycle_index} repeats configuration {rec.config.label}"
                )
            labels.add(rec.config.label)
        for cycle, labels in seen.items():
            if labels != set(CONFIG_LABELS):
                missing = sorted(set(CONFIG_LABELS) - labels)
                raise DataError(f"cycle {cycle} is missing configurations {missing}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def cycle_indices(self) -> tuple[int, ...]:
        return tuple(sorted({rec.cycle_index for rec in self.records}))

    def cycles(self) -> Iterator[tuple[int, dict[str, MeasurementRecord]]]:
        by_cycle: dict[int, dict[str, MeasurementRecord]] = {}
        for rec in self.records:
            by_cycle.setdefault(rec.cycle_index, {})[rec.config.label] = rec
        for cycle in sorted(by_cycle):
            yield cycle, by_cycle[cycle]

    def cycle_power_sets(self) -> list[CyclePowers]:
        """Raw (not background-subtracted) power sets, one per cycle."""
        out = []
        for _, recs in self.cycles():
            out.append(
                CyclePowers(
                    p0=recs["0"].mean_power,
                    pa=recs["A"].mean_power,
                    pb=recs["B"].mean_power,
                    pc=recs["C"].mean_power,
                    pab=recs["AB"].mean_power,
                    pbc=recs["BC"].mean_power,
                    pca=recs["CA"].mean_power,
                    pabc=recs["ABC"].mean_power,
                    background_subtracted=False,
                )
            )
        return out


def crosstalk_offsets(config: ShutterConfig, crosstalk: CrosstalkSpec) -> dict[str, float]:
    """Phase offset each open path acquires from the closed shutters."""
    shifts = _CROSSTALK_SHIFTS[crosstalk.convention]
    offsets = {p: 0.0 for p in PATHS}
    for closed in config.closed_paths():
        for open_path in config.open_paths():
            offsets[open_path] += shifts[(closed, open_path)] * crosstalk.dphi_dh
    return offsets


def _path_weights_and_offsets(
    source: SourceSpec,
    config: ShutterConfig,
    residual: ResidualLightSpec,
    crosstalk: CrosstalkSpec,
) -> tuple[dict[str, float], dict[str, float]]:
    ct = crosstalk_offsets(config, crosstalk)
    weights: dict[str, float] = {}
    offsets: dict[str, float] = {}
    for p in PATHS:
        if config.is_open(p):
            weights[p] = source.transmission(p)
            offsets[p] = ct[p]
        else:
            weights[p] = residual.tau * source.transmission(p)
            # leaked light is advanced by phi_sh relative to the open state,
            # giving cos(dphi + phi_sh) cross terms against open paths
            offsets[p] = -residual.phi_sh
    return weights, offsets


def _expansion(
    weights: dict[str, float],
    offsets: dict[str, float],
    phases: PhasePoint,
    pair_deltas: Sequence[float] | np.ndarray = (0.0, 0.0, 0.0),
    contrast: float = 1.0,
):
    """Pairwise interference expansion; broadcasts over array-valued deltas."""
    total = sum(weights.values())
    for (i, j, attr), delta in zip(_PAIRS, pair_deltas):
        w = math.sqrt(weights[i] * weights[j])
        if w == 0.0:
            continue
        angle = getattr(phases, attr) + (offsets[i] - offsets[j])
        total = total + 2.0 * w * contrast * np.cos(angle + delta)
    return total


def ideal_powers(source: SourceSpec, phases: PhasePoint, config: ShutterConfig) -> float:
    """Detected power of a perfect instrument (no leaks, no noise, no dark)."""
    weights = {p: source.transmission(p) if config.is_open(p) else 0.0 for p in PATHS}
    offsets = {p: 0.0 for p in PATHS}
    return float(source.p_in * _expansion(weights, offsets, phases))


def detector_response(power: float, nl: NonlinearitySpec) -> float:
    """Detector reading for a given optical power; identity for a linear detector."""
    if power < 0.0:
        raise DomainError(f"power must be >= 0, got {power!r}")
    if nl.is_linear:
        return power
    _check_monotone(nl, power)
    return power * (1.0 + nl.c2 * power + nl.c3 * power * power)


def _check_monotone(nl: NonlinearitySpec, p_max: float) -> None:
    """Require r'(P) = 1 + 2*c2*P + 3*c3*P^2 > 0 on [0, p_max]."""
    if p_max <= 0.0:
        return
    candidates = [0.0, p_max]
    if nl.c3 != 0.0:
        vertex = -nl.c2 / (3.0 * nl.c3)
        if 0.0 < vertex < p_max:
            candidates.append(vertex)
    for p in candidates:
        if 1.0 + 2.0 * nl.c2 * p + 3.0 * nl.c3 * p * p <= 0.0:
            raise ConfigurationError(
                f"detector response is not strictly increasing on [0, {p_max!r}]"
            )


def invert_detector_response(reading: float, nl: NonlinearitySpec) -> float:
    """Recover the optical power behind a reading; Newton with bisection fallback."""
    if reading < 0.0:
        raise DomainError(f"reading must be >= 0, got {reading!r}")
    if nl.is_linear or reading == 0.0:
        return reading

    def f(p: float) -> float:
        return p * (1.0 + nl.c2 * p + nl.c3 * p * p) - reading

    # bracket the root; the response is required to be monotone on the range
    lo, hi = 0.0, max(reading, 1e-300)
    for _ in range(200):
        _check_monotone(nl, hi)
        if f(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise DomainError(f"reading {reading!r} is outside the invertible response range")

    p = min(max(reading, lo), hi)
    for _ in range(100):
        fp = f(p)
        dfp = 1.0 + 2.0 * nl.c2 * p + 3.0 * nl.c3 * p * p
        if dfp > 0.0:
            step = fp / dfp
            p_new = p - step
        else:
            p_new = math.nan
        if not (lo <= p_new <= hi):
            # safeguarded bisection step
            if fp > 0.0:
                hi = p
            else:
                lo = p
            p_new = 0.5 * (lo + hi)
        if abs(p_new - p) <= 1e-12 * max(abs(p_new), 1e-300):
            return p_new
        if f(p_new) > 0.0:
            hi = p_new
        else:
            lo = p_new
        p = p_new
    return p


def imperfect_powers(
    source: SourceSpec,
    phases: PhasePoint,
    spec: ImperfectionSpec,
    config: ShutterConfig,
    noise_draw: Sequence[float] | None = None,
) -> float:
    """Detector reading of one shutter setting under the full imperfection model.

    `noise_draw` supplies the four standard-normal variates of this setting:
    (input power, B-C phase, C-A phase, A-B phase). None means no noise.
    With every imperfection disabled the result is the ideal power plus the
    dark background, exactly.
    """
    if noise_draw is None:
        z = (0.0, 0.0, 0.0, 0.0)
    else:
        z = tuple(float(v) for v in noise_draw)
        if len(z) != 4:
            raise UsageError(f"noise_draw must supply 4 variates, got {len(z)}")
    fl = spec.fluctuations
    p_in = source.p_in * (1.0 + fl.sigma_pin_rel * z[0])
    deltas = tuple(fl.sigma_phase * v for v in z[1:])
    contrast = math.exp(-0.5 * fl.sigma_phase_fast ** 2)
    optical = _optical_power(source, phases, spec, config, deltas, contrast, p_in)
    return detector_response(float(optical), spec.nonlinearity)


def _optical_power(
    source: SourceSpec,
    phases: PhasePoint,
    spec: ImperfectionSpec,
    config: ShutterConfig,
    pair_deltas,
    contrast: float,
    p_in: float,
):
    """Optical power before the detector; broadcasts over array pair deltas."""
    weights, offsets = _path_weights_and_offsets(
        source, config, spec.residual, spec.crosstalk
    )
    pol = spec.polarization
    if pol.is_single_polarization:
        h = {p: pol.h_fraction(p) for p in PATHS} if pol.polarizer_enabled else None
        if h is not None:
            weights = {p: weights[p] * h[p] for p in PATHS}
        total = _expansion(weights, offsets, phases, pair_deltas, contrast)
    else:
        w_h = {p: weights[p] * pol.h_fraction(p) for p in PATHS}
        w_v = {p: weights[p] * (1.0 - pol.h_fraction(p)) for p in PATHS}
        total = _expansion(w_h, offsets, phases, pair_deltas, contrast)
        total = total + _expansion(w_v, offsets, pol.phases_v, pair_deltas, contrast)
    return source.p_dark + p_in * total


def simulate_measurement(
    source: SourceSpec,
    phases: PhasePoint,
    spec: ImperfectionSpec,
    n_cycles: int,
    samples_per_setting: int,
    seed: int,
    setting_duration_s: float = 13.0,
    housing_temp_c: float = 23.0,
) -> MeasurementLog:
    """Simulate a randomized shutter-cycle measurement run.

    Each cycle visits all eight shutter configurations in an independent
    uniform random order. Slow fluctuations (input power, pairwise phases)
    are drawn once per setting; fast phase noise, when enabled, is drawn per
    sample so the recorded spread and the contrast loss both emerge from the
    aggregation. Substreams are keyed by (cycle, configuration), so the
    simulated values do not depend on the visiting order, and the whole log
    is reproducible from the seed.
    """
    if n_cycles < 1:
        raise DomainError("n_cycles must be >= 1")
    if samples_per_setting < 1:
        raise DomainError("samples_per_setting must be >= 1")
    fl = spec.fluctuations
    records: list[MeasurementRecord] = []
    for cycle in range(n_cycles):
        order = permutation_stream(seed, cycle).permutation(len(ALL_CONFIGS))
        for position, config_index in enumerate(order):
            config = ALL_CONFIGS[int(config_index)]
            g = setting_stream(seed, cycle, int(config_index))
            z = g.normal(size=4)
            p_in = source.p_in * (1.0 + fl.sigma_pin_rel * z[0])
            deltas = fl.sigma_phase * z[1:4]
            if fl.sigma_phase_fast > 0.0:
                fast = g.normal(0.0, fl.sigma_phase_fast, size=(samples_per_setting, 3))
                pair_deltas = deltas[np.newaxis, :] + fast
                optical = _optical_power(
                    source, phases, spec, config,
                    (pair_deltas[:, 0], pair_deltas[:, 1], pair_deltas[:, 2]),
                    1.0, p_in,
                )
                # configs without cross terms collapse to a scalar
                optical = np.broadcast_to(
                    np.asarray(optical, dtype=float), (samples_per_setting,)
                )
                readings = np.array(
                    [detector_response(float(p), spec.nonlinearity) for p in optical]
                )
            else:
                optical = _optical_power(source, phases, spec, config, deltas, 1.0, p_in)
                reading = detector_response(float(optical), spec.nonlinearity)
                readings = np.full(samples_per_setting, reading)
            mean = float(np.mean(readings))
            std = float(np.std(readings, ddof=1)) if samples_per_setting > 1 else 0.0
            records.append(
                MeasurementRecord(
                    cycle_index=cycle,
                    config=config,
                    mean_power=mean,
                    std_power=std,
                    n_samples=samples_per_setting,
                    housing_temp=housing_temp_c,
                    input_power=float(p_in),
                    timestamp=(cycle * len(ALL_CONFIGS) + position) * setting_duration_s,
                )
            )
    metadata = {
        "seed": seed,
        "n_cycles": n_cycles,
        "samples_per_setting": samples_per_setting,
        "setting_duration_s": setting_duration_s,
        "housing_temp_c": housing_temp_c,
    }
    return MeasurementLog(records=tuple(records), metadata=metadata)
