"""Fundamental quantities of the Peres and Sorkin tests.

Pure functions relating background-referenced detector powers, normalized
interference terms and the two test statistics. No randomness, no I/O and
no statistics live here; everything is safe to call concurrently.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

from .errors import DegenerateDataError, DomainError, UsageError

TWO_PI = 2.0 * math.pi


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PhasePoint:
    """Point in phase space: the three pairwise phase differences in radians.

    Components are ordered (B-C, C-A, A-B). A physically realizable point
    satisfies dphi_bc + dphi_ca + dphi_ab = 2*pi*n for some integer n.
    """

    dphi_bc: float
    dphi_ca: float
    dphi_ab: float

    def __post_init__(self):
        for name in ("dphi_bc", "dphi_ca", "dphi_ab"):
            _check_finite(name, getattr(self, name))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dphi_bc, self.dphi_ca, self.dphi_ab)

    def phase_sum(self) -> float:
        return self.dphi_bc + self.dphi_ca + self.dphi_ab

    def plane_residual(self, n: int = 0) -> float:
        """Signed distance of the phase sum from the plane sum = 2*pi*n."""
        return self.phase_sum() - TWO_PI * n

    def cosines(self) -> "InterferenceTerms":
        return InterferenceTerms(
            alpha=math.cos(self.dphi_bc),
            beta=math.cos(self.dphi_ca),
            gamma=math.cos(self.dphi_ab),
        )

    def flipped(self) -> "PhasePoint":
        """Global sign flip; leaves all cosines unchanged."""
        return PhasePoint(-self.dphi_bc, -self.dphi_ca, -self.dphi_ab)


@dataclass(frozen=True)
class InterferenceTerms:
    """Normalized interference terms (alpha, beta, gamma).

    alpha, beta and gamma are the cosines of the B-C, C-A and A-B phase
    differences. Measured terms may exceed [-1, 1] through noise; such
    values are kept as-is and flagged via `out_of_range`.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            _check_finite(name, getattr(self, name))

    @property
    def out_of_range(self) -> bool:
        return any(abs(t) > 1.0 for t in self.as_tuple())

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    def product(self) -> float:
        return self.alpha * self.beta * self.gamma


@dataclass(frozen=True)
class CyclePowers:
    """The eight detector powers of one shutter cycle, in watts.

    `background_subtracted` records whether the all-closed power p0 has
    already been removed from every combination.
    """

    p0: float
    pa: float
    pb: float
    pc: float
    pab: float
    pbc: float
    pca: float
    pabc: float
    background_subtracted: bool = False

    _FIELDS = ("p0", "pa", "pb", "pc", "pab", "pbc", "pca", "pabc")

    def __post_init__(self):
        for name in self._FIELDS:
            _check_finite(name, getattr(self, name))

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self._FIELDS}

    def scaled(self, factor: float) -> "CyclePowers":
        values = {name: getattr(self, name) * factor for name in self._FIELDS}
        return CyclePowers(**values, background_subtracted=self.background_subtracted)


@dataclass(frozen=True)
class PeresResult:
    """Peres parameter together with the terms it was computed from."""

    f: float
    terms: InterferenceTerms


@dataclass(frozen=True)
class SorkinResult:
    """Sorkin statistic: mean deviation rate, normalisation and their ratio."""

    epsilon: float
    kappa: float
    denominator: float


def normalize_phase(p: PhasePoint) -> PhasePoint:
    """Map each component into (-pi, pi]; cosines are unchanged."""

    def wrap(x: float) -> float:
        r = math.remainder(x, TWO_PI)
        if r <= -math.pi:
            r += TWO_PI
        return r

    return PhasePoint(wrap(p.dphi_bc), wrap(p.dphi_ca), wrap(p.dphi_ab))


def subtract_background(raw: CyclePowers) -> CyclePowers:
    """Subtract the all-closed background p0 from every combination of the cycle."""
    if raw.background_subtracted:
        raise UsageError("background already subtracted from this cycle")
    shifted = {name: getattr(raw, name) - raw.p0 for name in CyclePowers._FIELDS}
    return CyclePowers(**shifted, background_subtracted=True)


def interference_terms(powers: CyclePowers) -> InterferenceTerms:
    """Extract (alpha, beta, gamma) from background-referenced cycle powers.

    alpha = (P_BC - P_B - P_C) / (2 sqrt(P_B P_C)) and analogously for the
    other two pairs. Single-path powers must be strictly positive.
    """
    if not powers.background_subtracted:
        raise UsageError("interference terms require background-subtracted powers")
    for name, label in (("pa", "A"), ("pb", "B"), ("pc", "C")):
        if getattr(powers, name) <= 0.0:
            raise DomainError(
                f"single-path power for path {label} must be > 0, "
                f"got {getattr(powers, name)!r}"
            )
    alpha = (powers.pbc - powers.pb - powers.pc) / (2.0 * math.sqrt(powers.pb * powers.pc))
    beta = (powers.pca - powers.pa - powers.pc) / (2.0 * math.sqrt(powers.pa * powers.pc))
    gamma = (powers.pab - powers.pa - powers.pb) / (2.0 * math.sqrt(powers.pa * powers.pb))
    return InterferenceTerms(alpha=alpha, beta=beta, gamma=gamma)


def peres_parameter(terms: InterferenceTerms) -> PeresResult:
    """Peres parameter F = a^2 + b^2 + g^2 - 2abg; equals 1 for closed phase sums."""
    a, b, g = terms.as_tuple()
    return PeresResult(f=a * a + b * b + g * g - 2.0 * a * b * g, terms=terms)


def sorkin_epsilon(powers: CyclePowers) -> float:
    """Third-order interference rate: deviation of P_ABC from its pairwise combination."""
    if not powers.background_subtracted:
        raise UsageError("Sorkin rate requires background-subtracted powers")
    return (
        powers.pabc
        + powers.pa
        + powers.pb
        + powers.pc
        - powers.pab
        - powers.pbc
        - powers.pca
    )


def _pairwise_magnitude(powers: CyclePowers) -> float:
    return (
        abs(powers.pab - powers.pa - powers.pb)
        + abs(powers.pbc - powers.pb - powers.pc)
        + abs(powers.pca - powers.pa - powers.pc)
    )


def sorkin_kappa(cycles: Sequence[CyclePowers]) -> SorkinResult:
    """Normalized Sorkin parameter over a set of cycles.

    kappa is the mean deviation rate divided by the mean summed magnitude of
    the pairwise interference terms, which makes it independent of input
    power and interference contrast.
    """
    if len(cycles) == 0:
        raise DegenerateDataError("need at least one cycle")
    for c in cycles:
        if not c.background_subtracted:
            raise UsageError("Sorkin statistics require background-subtracted cycles")
    mean_eps = sum(sorkin_epsilon(c) for c in cycles) / len(cycles)
    mean_denom = sum(_pairwise_magnitude(c) for c in cycles) / len(cycles)
    if mean_denom <= 0.0:
        raise DegenerateDataError("pairwise interference magnitudes sum to zero")
    return SorkinResult(epsilon=mean_eps, kappa=mean_eps / mean_denom, denominator=mean_denom)
