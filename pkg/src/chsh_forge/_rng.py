"""Counter-based random substreams.

Every random model is a pure function of a 64-bit seed: draw ``k`` of the
stream keyed by ``seed`` is ``splitmix64(splitmix64(seed) + k * GAMMA)``.
Because draws are addressed by counter, a batch of models can be generated
in one vectorized pass and still match one-at-a-time generation bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = np.uint64(0x9E3779B97F4A7C15)
_TRIAL_GAMMA = 0xD1B54A32D192ED03
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + GAMMA
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix_int(x: int) -> int:
    return int(splitmix64(np.array([x & MASK64], dtype=np.uint64))[0])


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of substream ``index`` under ``master_seed``.

    Independent of any other index, so trials can be generated in any order.
    """
    if index < 0:
        raise ValueError("substream index must be non-negative")
    return _mix_int((_mix_int(master_seed) + index * _TRIAL_GAMMA) & MASK64)


def derive_seeds(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorized :func:`derive_seed`."""
    idx = np.asarray(indices, dtype=np.uint64)
    key = np.uint64(_mix_int(master_seed))
    return splitmix64(key + idx * np.uint64(_TRIAL_GAMMA))


def draws(seeds: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Raw 64-bit draws, shape ``seeds.shape + counters.shape``."""
    keys = splitmix64(np.asarray(seeds, dtype=np.uint64))
    ctr = np.asarray(counters, dtype=np.uint64)
    return splitmix64(keys[..., None] + ctr * GAMMA)


def to_unit_interval(raw: np.ndarray) -> np.ndarray:
    """Map 64-bit draws to floats in (0, 1] using the top 53 bits."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
