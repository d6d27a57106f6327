from __future__ import annotations

import pytest

from peresim import (
    BENCHMARKS,
    InterferenceTerms,
    SourceSpec,
    correct_phase_point,
)


@pytest.fixture(scope="session")
def source():
    return SourceSpec(p_in=1.0, t_a=0.26, t_b=0.52, t_c=0.22)


@pytest.fixture(scope="session")
def corrected_23c():
    terms = InterferenceTerms(*BENCHMARKS["23C"].reconstructed_terms)
    return correct_phase_point(terms).point


@pytest.fixture(scope="session")
def corrected_30c():
    terms = InterferenceTerms(*BENCHMARKS["30C"].reconstructed_terms)
    return correct_phase_point(terms).point
