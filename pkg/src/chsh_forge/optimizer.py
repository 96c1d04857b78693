"""Independent CHSH oracles and the random hunt for a violation.

The 16 deterministic strategies are the extreme points of the set of local
models; each gives S = +2 or -2, and every LHV model's S is a weighted
average of those values. :func:`hunt` draws many random models and counts
any with |S| > 2. It should never find one.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _rng
from .core import LhvModel, SettingUniverse, chsh, integrand_table
from .pool import PoolEntry, random_arrays

VIOLATION_TOL = 1e-9
BIN_WIDTH = 0.05
HIST_LO, HIST_HI = -2.2, 2.2
N_BINS = 88
DEFAULT_CHUNK = 10_000
THREADS_ENV = "CHSH_FORGE_THREADS"


class DeterministicStrategy(NamedTuple):
    a1: int
    a2: int
    b1: int
    b2: int

    def chsh(self) -> int:
        return self.a1 * self.b1 - self.a1 * self.b2 - self.a2 * self.b1 - self.a2 * self.b2


def enumerate_deterministic() -> list[tuple[DeterministicStrategy, int]]:
    """All 16 +/-1 assignments to (A1, A2, B1, B2) with their integer S."""
    out = []
    for values in itertools.product((1, -1), repeat=4):
        s = DeterministicStrategy(*values)
        out.append((s, s.chsh()))
    return out


def brute_force_chsh(model: LhvModel) -> float:
    """S as the weighted mean of the per-point integrand.

    Uses the combined-integrand route, so it is an independent check on
    :func:`chsh_forge.core.chsh`, which sums four separate correlations.
    """
    values = integrand_table(model)
    return float(np.dot(model.weights, values.astype(np.float64)))


def max_over_pool(pool: Sequence[PoolEntry]) -> tuple[int, float]:
    """(trial_index, S) of the entry with the largest |S|; earliest wins ties."""
    if not pool:
        raise ValueError("pool is empty")
    best_index, best_s = pool[0].trial_index, chsh(pool[0].model)
    for e in pool[1:]:
        s = chsh(e.model)
        if abs(s) > abs(best_s):
            best_index, best_s = e.trial_index, s
    return best_index, best_s


def histogram_bins(s: np.ndarray) -> np.ndarray:
    """Bin index of each S on the fixed 0.05-wide grid over [-2.2, 2.2).

    Values outside the grid are clipped into the edge bins. Edges are snapped
    by 1e-9 so that float dust around S = -2 stays in the bin starting at -2.
    """
    k = np.floor(np.asarray(s) / BIN_WIDTH + 1e-9).astype(np.int64) + N_BINS // 2
    return np.clip(k, 0, N_BINS - 1)


def histogram_edges() -> np.ndarray:
    return HIST_LO + BIN_WIDTH * np.arange(N_BINS + 1)


@dataclass(frozen=True)
class FalsificationEvent:
    """A model with |S| > 2 + 1e-9, reproducible from ``seed``."""

    index: int
    seed: int
    s: float


@dataclass
class HuntReport:
    n_models: int
    max_abs_s: float
    argmax_index: int
    argmax_seed: int
    argmax_s: float
    histogram: np.ndarray
    space_size: int
    master_seed: int
    falsifications: list[FalsificationEvent] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return len(self.falsifications)

    def merge(self, other: "HuntReport") -> "HuntReport":
        """Combine two partial reports; the result does not depend on order."""
        mine = (-self.max_abs_s, self.argmax_index)
        theirs = (-other.max_abs_s, other.argmax_index)
        best = self if mine <= theirs else other
        events = sorted(self.falsifications + other.falsifications, key=lambda e: e.index)
        return HuntReport(
            self.n_models + other.n_models,
            best.max_abs_s,
            best.argmax_index,
            best.argmax_seed,
            best.argmax_s,
            self.histogram + other.histogram,
            self.space_size,
            self.master_seed,
            events,
        )

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "space_size": self.space_size,
            "n_models": self.n_models,
            "max_abs_s": self.max_abs_s,
            "argmax_index": self.argmax_index,
            "argmax_seed": self.argmax_seed,
            "argmax_s": self.argmax_s,
            "violations": self.violations,
            "violation_threshold": 2.0 + VIOLATION_TOL,
            "histogram": {
                "lo": HIST_LO,
                "hi": HIST_HI,
                "bin_width": BIN_WIDTH,
                "counts": [int(c) for c in self.histogram],
            },
            "falsifications": [{"index": e.index, "seed": e.seed, "s": e.s} for e in self.falsifications],
        }


def batch_chsh(weights: np.ndarray, alice_q: np.ndarray, bob_q: np.ndarray) -> np.ndarray:
    """S for a batch, from four correlations each; quartet tables are (M, k, 2)."""
    a = alice_q.astype(np.float64)
    b = bob_q.astype(np.float64)
    e = [np.einsum("mk,mk->m", weights, a[:, :, i] * b[:, :, j]) for i, j in ((0, 0), (0, 1), (1, 0), (1, 1))]
    return e[0] - e[1] - e[2] - e[3]


def _hunt_chunk(master_seed: int, start: int, stop: int, space_size: int, universe: SettingUniverse) -> HuntReport:
    indices = np.arange(start, stop)
    seeds = _rng.derive_seeds(master_seed, indices)
    w, a, b = random_arrays(seeds, space_size, len(universe.alice_settings), len(universe.bob_settings))
    ai, bi = universe.quartet_columns()
    s = batch_chsh(w, a[:, :, ai], b[:, :, bi])
    abs_s = np.abs(s)
    j = int(np.argmax(abs_s))  # first occurrence on ties
    hist = np.bincount(histogram_bins(s), minlength=N_BINS)
    bad = np.flatnonzero(abs_s > 2.0 + VIOLATION_TOL)
    events = [FalsificationEvent(int(indices[i]), int(seeds[i]), float(s[i])) for i in bad]
    return HuntReport(
        len(indices), float(abs_s[j]), int(indices[j]), int(seeds[j]), float(s[j]), hist, space_size, master_seed, events
    )


def _thread_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, threads)


def hunt(
    master_seed: int,
    count: int,
    space_size: int,
    universe: SettingUniverse | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int | None = None,
) -> HuntReport:
    """Draw ``count`` random LHV models and look for |S| > 2.

    Model ``i`` (1-based) uses the substream ``derive_seed(master_seed, i)``,
    the same seed :func:`chsh_forge.pool.draw_pool` gives trial ``i``, so any
    model in the report can be rebuilt with :func:`random_model`. Work is
    split into chunks; the merged report does not depend on chunk size or
    thread count. Thread count defaults to ``$CHSH_FORGE_THREADS``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if space_size < 1:
        raise ValueError(f"space_size must be >= 1, got {space_size}")
    universe = universe or SettingUniverse.minimal()
    bounds = [(lo, min(lo + chunk_size, count + 1)) for lo in range(1, count + 1, chunk_size)]
    n_threads = min(_thread_count(threads), len(bounds))
    if n_threads == 1:
        parts = [_hunt_chunk(master_seed, lo, hi, space_size, universe) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(lambda b: _hunt_chunk(master_seed, b[0], b[1], space_size, universe), bounds))
    report = parts[0]
    for p in parts[1:]:
        report = report.merge(p)
    return report

