"""Counter-based random substreams.

All randomness in the toolkit flows through Philox streams keyed by the user
seed, with the counter encoding (purpose, cycle, slot). Substreams are
therefore independent of evaluation order and of any parallel scheduling.
"""

from __future__ import annotations

import numpy as np

_TAG_PERMUTATION = 1
_TAG_SETTING = 2
_TAG_MC = 3

_MASK64 = (1 << 64) - 1


def _stream(seed: int, tag: int, cycle: int = 0, slot: int = 0) -> np.random.Generator:
    key = [seed & _MASK64, (seed >> 64) & _MASK64]
    counter = [0, tag & _MASK64, cycle & _MASK64, slot & _MASK64]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def permutation_stream(seed: int, cycle: int) -> np.random.Generator:
    """Stream that orders the shutter configurations of one cycle."""
    return _stream(seed, _TAG_PERMUTATION, cycle)


def setting_stream(seed: int, cycle: int, config_index: int) -> np.random.Generator:
    """Stream that supplies the noise variates of one shutter setting."""
    return _stream(seed, _TAG_SETTING, cycle, config_index)


def mc_stream(seed: int, series: int = 0) -> np.random.Generator:
    """Stream backing one vectorized Monte Carlo estimate."""
    return _stream(seed, _TAG_MC, series)
