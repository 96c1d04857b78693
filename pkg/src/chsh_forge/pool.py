"""Random pools of LHV models and the one-model-per-pair stitching construction.

A pool assigns each trial ``n = 1..N`` a setting pair and its own randomly
drawn local model. Selecting, for every quartet pair, some trial whose model
hits a target correlation, and then answering each pair with "its" model,
gives a :class:`StitchedModel`. That object picks the model only after both
settings are known, so it is not local, and it can reach any CHSH value up
to 4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence, Union

import numpy as np

from . import _rng
from .core import (
    HiddenSpace,
    LhvModel,
    Pair,
    SettingUniverse,
    chsh,
    chsh_from_correlations,
    correlation,
    ensure_valid,
    quartet_correlations,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
DEFAULT_TOL = 0.01


def _table_words(n_alice: int, n_bob: int) -> int:
    return -(-(n_alice + n_bob) // 64)


def random_arrays(
    seeds: np.ndarray, space_size: int, n_alice: int, n_bob: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weights and response tables for a batch of seeds.

    Returns ``(weights, alice, bob)`` with shapes ``(M, k)``, ``(M, k, n_alice)``
    and ``(M, k, n_bob)``. Row ``m`` depends on ``seeds[m]`` alone.
    """
    if space_size < 1:
        raise ValueError(f"space_size must be >= 1, got {space_size}")
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    k = space_size
    u = _rng.to_unit_interval(_rng.draws(seeds, np.arange(k, dtype=np.uint64)))
    weights = u / u.sum(axis=1, keepdims=True)

    words = _table_words(n_alice, n_bob)
    raw = _rng.draws(seeds, k + np.arange(k * words, dtype=np.uint64)).reshape(len(seeds), k, words)
    bit = np.arange(n_alice + n_bob)
    bits = (raw[:, :, bit // 64] >> (bit % 64).astype(np.uint64)) & np.uint64(1)
    signs = (2 * bits.astype(np.int8) - 1).astype(np.int8)
    return weights, signs[:, :, :n_alice], signs[:, :, n_alice:]


def _point_names(k: int) -> tuple[str, ...]:
    return tuple(f"l{i}" for i in range(k))


def random_model(seed: int, space_size: int, universe: SettingUniverse) -> LhvModel:
    """A random LHV model, a pure function of its arguments.

    Weights are uniform variates normalized to sum to one; table entries are
    independent fair +/-1.
    """
    w, a, b = random_arrays(
        np.array([seed], dtype=np.uint64), space_size, len(universe.alice_settings), len(universe.bob_settings)
    )
    return LhvModel(HiddenSpace(_point_names(space_size), w[0]), universe, a[0], b[0])


@dataclass(frozen=True, eq=False)
class PoolEntry:
    trial_index: int
    pair: Pair
    model: LhvModel
    seed: int


Schedule = Union[str, Sequence[Sequence[str]]]


def draw_pool(
    seed: int,
    n_trials: int,
    universe: SettingUniverse,
    space_size: int,
    schedule: Schedule = "uniform",
) -> list[PoolEntry]:
    """Trials 1..n_trials, each with a setting pair and its own random model.

    ``schedule`` is either an explicit list of quartet pairs (one per trial)
    or ``"uniform"``, in which case each trial's pair is drawn uniformly from
    the quartet on a separate substream. Trial ``n``'s model uses the seed
    ``derive_seed(seed, n)``.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    quartet = universe.quartet
    if isinstance(schedule, str):
        if schedule != "uniform":
            raise ValueError(f"unknown schedule mode {schedule!r}")
        raw = _rng.draws(np.array([_rng.derive_seed(seed, 0)]), np.arange(1, n_trials + 1))[0]
        pairs = [quartet[int(i)] for i in raw >> np.uint64(62)]
    else:
        if len(schedule) == 0:
            raise ValueError("explicit schedule is empty")
        if len(schedule) != n_trials:
            raise ValueError(f"schedule has {len(schedule)} pairs for {n_trials} trials")
        pairs = [universe.check_pair(q) for q in schedule]

    trial_seeds = _rng.derive_seeds(seed, np.arange(1, n_trials + 1))
    w, a, b = random_arrays(trial_seeds, space_size, len(universe.alice_settings), len(universe.bob_settings))
    names = _point_names(space_size)
    return [
        PoolEntry(n + 1, pairs[n], LhvModel(HiddenSpace(names, w[n]), universe, a[n], b[n]), int(trial_seeds[n]))
        for n in range(n_trials)
    ]


def pool_quartet_correlations(pool: Sequence[PoolEntry]) -> np.ndarray:
    """(N, 4) array of every entry's four quartet correlations."""
    models = [e.model for e in pool]
    shapes = {(m.alice_table.shape, m.bob_table.shape, m.universe) for m in models}
    if len(shapes) != 1:
        return np.array([quartet_correlations(m) for m in models])
    for m in models:
        ensure_valid(m)
    ai, bi = models[0].universe.quartet_columns()
    w = np.stack([m.weights for m in models])
    a = np.stack([m.alice_table[:, ai] for m in models]).astype(np.float64)
    b = np.stack([m.bob_table[:, bi] for m in models]).astype(np.float64)
    out = np.empty((len(models), 4))
    for k, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        out[:, k] = np.einsum("nk,nk->n", w, a[:, :, i] * b[:, :, j])
    return out


@dataclass(frozen=True)
class QuantumTargets:
    """Target correlation for each quartet pair."""

    per_pair: Mapping[Pair, float]

    def __post_init__(self) -> None:
        for q, c in self.per_pair.items():
            if not -1.0 <= c <= 1.0:
                raise ValueError(f"target {c!r} for {q!r} is outside [-1, 1]")

    @classmethod
    def from_values(cls, universe: SettingUniverse, values: Sequence[float]) -> "QuantumTargets":
        """Targets given in CHSH order (1,1), (1,2), (2,1), (2,2)."""
        if len(values) != 4:
            raise ValueError("need exactly four target values")
        return cls(dict(zip(universe.quartet, map(float, values))))

    @classmethod
    def singlet(cls, universe: SettingUniverse) -> "QuantumTargets":
        """+1/sqrt(2) on (1_A, 1_B) and -1/sqrt(2) on the other three pairs."""
        return cls.from_values(universe, (INV_SQRT2, -INV_SQRT2, -INV_SQRT2, -INV_SQRT2))

    def values(self, universe: SettingUniverse) -> np.ndarray:
        return np.array([self.per_pair[q] for q in universe.quartet])


@dataclass(frozen=True)
class Selection:
    matches: dict[Pair, int]
    missing: list[Pair] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing


def select_matching_trials(pool: Sequence[PoolEntry], targets: QuantumTargets, tol: float = DEFAULT_TOL) -> Selection:
    """Earliest trial per pair whose model matches that pair's target.

    A trial only counts for the pair it was scheduled with. Pairs with no
    match are listed in ``missing`` rather than raised.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    wanted = dict(targets.per_pair)
    matches: dict[Pair, int] = {}
    for entry in pool:
        q = entry.pair
        if q in matches or q not in wanted:
            continue
        if abs(correlation(entry.model, *q).value - wanted[q]) <= tol:
            matches[q] = entry.trial_index
            if len(matches) == len(wanted):
                break
    missing = [q for q in wanted if q not in matches]
    return Selection(matches, missing)


def construct_target_model(pair: Sequence[str], c: float, universe: SettingUniverse) -> LhvModel:
    """Two-point model with E(pair) = c exactly.

    Weights are ``(p, 1 - p)`` with ``p = (1 + c) / 2``. Bob answers -1 at the
    pair's setting on the second point; every other outcome is +1.
    """
    q = universe.check_pair(pair)
    if not -1.0 <= c <= 1.0:
        raise ValueError(f"target correlation must lie in [-1, 1], got {c!r}")
    p = (1.0 + c) / 2.0
    A = np.ones((2, len(universe.alice_settings)), dtype=np.int8)
    B = np.ones((2, len(universe.bob_settings)), dtype=np.int8)
    B[1, universe.bob_index(q[1])] = -1
    return LhvModel(HiddenSpace(("l0", "l1"), [p, 1.0 - p]), universe, A, B)


@dataclass(frozen=True, eq=False)
class StitchedModel:
    """One LHV model per quartet pair, chosen after both settings are known.

    This is deliberately not an :class:`LhvModel`: the response to a setting
    of Alice depends on which setting Bob chose, so in general no single
    local model reproduces it.
    """

    per_pair: Mapping[Pair, LhvModel]

    @property
    def universe(self) -> SettingUniverse:
        return next(iter(self.per_pair.values())).universe

    def model_for(self, pair: Sequence[str]) -> LhvModel:
        return self.per_pair[(pair[0], pair[1])]


def stitch(per_pair: Mapping[Pair, LhvModel]) -> StitchedModel:
    if not per_pair:
        raise ValueError("no models to stitch")
    universe = next(iter(per_pair.values())).universe
    for q, m in per_pair.items():
        if m.universe != universe:
            raise ValueError(f"model for {q!r} uses a different setting universe")
        ensure_valid(m)
    missing = [q for q in universe.quartet if q not in per_pair]
    if missing:
        raise ValueError(f"no model for quartet pair(s) {missing!r}")
    extra = [q for q in per_pair if q not in universe.quartet]
    if extra:
        raise ValueError(f"pair(s) {extra!r} are not in the quartet")
    return StitchedModel({q: per_pair[q] for q in universe.quartet})


def stitched_correlations(stitched: StitchedModel) -> np.ndarray:
    """E for each quartet pair, each taken from that pair's own model."""
    return np.array([correlation(stitched.per_pair[q], *q).value for q in stitched.universe.quartet])


def chsh_nonlocal(stitched: StitchedModel) -> float:
    """CHSH combination of the per-pair correlations. Not bounded by 2."""
    return chsh_from_correlations(stitched_correlations(stitched))


def stitch_targets(targets: QuantumTargets, universe: SettingUniverse) -> StitchedModel:
    """Stitch one :func:`construct_target_model` per quartet pair."""
    return stitch({q: construct_target_model(q, targets.per_pair[q], universe) for q in universe.quartet})


def stitch_selection(pool: Sequence[PoolEntry], selection: Selection) -> StitchedModel:
    if not selection.complete:
        raise ValueError(f"selection is missing pair(s) {selection.missing!r}")
    by_index = {e.trial_index: e for e in pool}
    return stitch({q: by_index[n].model for q, n in selection.matches.items()})


def component_table(stitched: StitchedModel) -> list[dict]:
    """Per pair: the correlation the stitched model uses, and the component's own S."""
    rows = []
    for q in stitched.universe.quartet:
        m = stitched.per_pair[q]
        rows.append(
            {
                "pair": list(q),
                "correlation": correlation(m, *q).value,
                "component_chsh": chsh(m),
                "component_correlations": [float(x) for x in quartet_correlations(m)],
            }
        )
    return rows


def stitch_report(stitched: StitchedModel, trial_indices: Mapping[Pair, int] | None = None) -> dict:
    """JSON-ready summary: selected correlations, S*, and the component contrast."""
    rows = component_table(stitched)
    if trial_indices is not None:
        for row in rows:
            row["trial_index"] = trial_indices[tuple(row["pair"])]
    return {
        "correlations": [row["correlation"] for row in rows],
        "s_star": chsh_nonlocal(stitched),
        "components": rows,
        "max_component_abs_chsh": max(abs(r["component_chsh"]) for r in rows),
    }


def manifest_lines(pool: Iterable[PoolEntry]) -> Iterable[str]:
    """One JSON object per entry: trial, pair, seed, quartet correlations, S."""
    for e in pool:
        corr = quartet_correlations(e.model)
        yield json.dumps(
            {
                "trial_index": e.trial_index,
                "pair": list(e.pair),
                "seed": e.seed,
                "correlations": [float(x) for x in corr],
                "chsh": chsh_from_correlations(corr),
            }
        )


def write_manifest(pool: Iterable[PoolEntry], fh: IO[str]) -> None:
    for line in manifest_lines(pool):
        fh.write(line + "\n")
