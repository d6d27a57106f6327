"""Phase-space reconstruction.

Measured interference terms define phase differences only up to cosine sign
ambiguity, and noise pushes the measured point off the physical planes where
the three differences sum to a multiple of 2*pi. This module enumerates the
sign candidates and recovers the closest physical point by normal projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import TWO_PI, InterferenceTerms, PhasePoint, peres_parameter
from .errors import AnalysisError, DomainError

CLAMP_TOLERANCE = 1e-9

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class CandidateSet:
    """The four sign assignments of a measured term set, modulo global flip.

    The first component is fixed to the principal arccos branch (>= 0); the
    remaining two carry both signs. `clamped` is set when a term marginally
    outside [-1, 1] was clamped onto the boundary.
    """

    candidates: tuple[PhasePoint, PhasePoint, PhasePoint, PhasePoint]
    source_terms: InterferenceTerms
    clamped: bool = False


@dataclass(frozen=True)
class ProjectionCandidate:
    """One candidate with its nearest plane and projection distance."""

    index: int
    plane_index: int
    distance: float
    point: PhasePoint


@dataclass(frozen=True)
class CorrectedPoint:
    """Result of projecting measured terms onto the closest physical plane."""

    point: PhasePoint
    plane_index: int
    distance: float
    chosen_candidate: int
    corrected_terms: InterferenceTerms
    survivors: tuple[ProjectionCandidate, ...]
    clamped: bool = False


def _clamped_arccos(value: float) -> tuple[float, bool]:
    if abs(value) <= 1.0:
        return math.acos(value), False
    if abs(value) <= 1.0 + CLAMP_TOLERANCE:
        return math.acos(math.copysign(1.0, value)), True
    raise DomainError(f"interference term {value!r} outside [-1, 1] beyond tolerance")


def candidate_phase_points(terms: InterferenceTerms) -> CandidateSet:
    """Enumerate the phase points consistent with measured terms.

    Each term fixes its phase difference up to sign; discarding the global
    flip leaves four candidates, canonicalised with dphi_bc >= 0.
    """
    a, clamped_a = _clamped_arccos(terms.alpha)
    b, clamped_b = _clamped_arccos(terms.beta)
    c, clamped_c = _clamped_arccos(terms.gamma)
    candidates = tuple(
        PhasePoint(a, sb * b, sc * c) for sb in (1.0, -1.0) for sc in (1.0, -1.0)
    )
    return CandidateSet(
        candidates=candidates,
        source_terms=terms,
        clamped=clamped_a or clamped_b or clamped_c,
    )


def project_to_plane(p: PhasePoint, n: int) -> PhasePoint:
    """Normal (Euclidean) projection onto the plane with phase sum 2*pi*n."""
    shift = p.plane_residual(n) / 3.0
    return PhasePoint(p.dphi_bc - shift, p.dphi_ca - shift, p.dphi_ab - shift)


def projection_distance(p: PhasePoint, n: int) -> float:
    """Euclidean distance from `p` to the plane with phase sum 2*pi*n."""
    return abs(p.plane_residual(n)) / _SQRT3


def _nearest_plane(p: PhasePoint) -> int:
    # components lie in [-pi, pi], so |sum| < 3*pi and n is one of {-1, 0, 1}
    n = round(p.phase_sum() / TWO_PI)
    return max(-1, min(1, int(n)))


def _positive_components(p: PhasePoint) -> int:
    return sum(1 for x in p.as_tuple() if x > 0.0)


def correct_phase_point(terms: InterferenceTerms) -> CorrectedPoint:
    """Recover the most probable physical phase point behind measured terms.

    Candidates whose nearest plane is n = +-1 are excluded: reaching those
    planes would require much larger shifts, which indicates an inconsistent
    sign assignment rather than noise. Among the candidates nearest to the
    n = 0 plane the one with the smallest projection distance wins; ties are
    broken towards more positive components, then lower candidate index.
    """
    cset = candidate_phase_points(terms)
    survivors: list[ProjectionCandidate] = []
    for index, cand in enumerate(cset.candidates):
        n = _nearest_plane(cand)
        if n != 0:
            continue
        survivors.append(
            ProjectionCandidate(
                index=index,
                plane_index=0,
                distance=projection_distance(cand, 0),
                point=project_to_plane(cand, 0),
            )
        )
    if not survivors:
        raise AnalysisError(
            "all sign candidates project onto the n = +-1 planes; "
            "no consistent physical point"
        )
    chosen = min(
        survivors,
        key=lambda s: (
            s.distance,
            -_positive_components(s.point),
            s.index,
        ),
    )
    return CorrectedPoint(
        point=chosen.point,
        plane_index=chosen.plane_index,
        distance=chosen.distance,
        chosen_candidate=chosen.index,
        corrected_terms=chosen.point.cosines(),
        survivors=tuple(survivors),
        clamped=cset.clamped,
    )


def corrected_peres(terms: InterferenceTerms) -> float:
    """Peres parameter of the corrected point (1 up to rounding, by construction)."""
    return peres_parameter(correct_phase_point(terms).corrected_terms).f
