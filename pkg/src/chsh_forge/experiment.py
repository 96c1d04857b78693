"""Finite-N CHSH experiments: event-by-event trials and empirical estimators.

Each trial samples a fresh hidden point from the model's weights, independent
of the settings, and records both parties' outcomes. The empirical CHSH
estimate fluctuates around the exact value, so a finite run can land above 2
even though the model itself cannot.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .core import LhvModel, Pair, SettingUniverse, chsh, ensure_valid, quartet_correlations
from .pool import StitchedModel, chsh_nonlocal, stitched_correlations

CHSH_SIGNS = np.array([1, -1, -1, -1])


class TrialRecord(NamedTuple):
    n: int
    pair: Pair
    a_out: int
    b_out: int


@dataclass(frozen=True, eq=False)
class TrialLog:
    """Column-wise trial records.

    ``pair_index[i]`` indexes ``universe.quartet``. Iterating yields
    :class:`TrialRecord` tuples.
    """

    universe: SettingUniverse
    n: np.ndarray
    pair_index: np.ndarray
    a_out: np.ndarray
    b_out: np.ndarray

    def __len__(self) -> int:
        return len(self.n)

    def __iter__(self) -> Iterator[TrialRecord]:
        quartet = self.universe.quartet
        for n, q, a, b in zip(self.n, self.pair_index, self.a_out, self.b_out):
            yield TrialRecord(int(n), quartet[q], int(a), int(b))

    def same_as(self, other: "TrialLog") -> bool:
        return self.universe == other.universe and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("n", "pair_index", "a_out", "b_out")
        )

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord], universe: SettingUniverse) -> "TrialLog":
        records = list(records)
        index = {q: i for i, q in enumerate(universe.quartet)}
        for r in records:
            if r.pair not in index:
                raise ValueError(f"trial {r.n}: pair {r.pair!r} is not in the quartet")
            if r.a_out not in (-1, 1) or r.b_out not in (-1, 1):
                raise ValueError(f"trial {r.n}: outcomes must be -1 or +1")
        return cls(
            universe,
            np.array([r.n for r in records], dtype=np.int64),
            np.array([index[r.pair] for r in records], dtype=np.int8),
            np.array([r.a_out for r in records], dtype=np.int8),
            np.array([r.b_out for r in records], dtype=np.int8),
        )


def round_robin_schedule(universe: SettingUniverse, n_per_pair: int) -> list[Pair]:
    """The quartet pairs in CHSH order, cycled ``n_per_pair`` times."""
    return list(universe.quartet) * n_per_pair


def uniform_schedule(universe: SettingUniverse, n_trials: int, seed: int) -> list[Pair]:
    idx = np.random.default_rng(seed).integers(0, 4, size=n_trials)
    return [universe.quartet[i] for i in idx]


def _sample_points(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(weights) - 1)


def run_trials(
    model: Union[LhvModel, StitchedModel], schedule: Sequence[Sequence[str]], seed: int
) -> TrialLog:
    """Run one trial per schedule entry.

    For an :class:`LhvModel` every trial draws a hidden point from the same
    weights. For a :class:`StitchedModel` each trial uses the component
    assigned to its pair, which is exactly the non-local recipe.
    """
    if len(schedule) == 0:
        raise ValueError("schedule is empty")
    stitched = isinstance(model, StitchedModel)
    universe = model.universe
    if not stitched:
        ensure_valid(model)
    index = {q: i for i, q in enumerate(universe.quartet)}
    try:
        pair_index = np.array([index[(q[0], q[1])] for q in schedule], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"schedule pair {exc.args[0]!r} is not in the quartet") from None

    rng = np.random.default_rng(seed)
    u = rng.random(len(schedule))
    a_out = np.empty(len(schedule), dtype=np.int8)
    b_out = np.empty(len(schedule), dtype=np.int8)
    for k, (x, y) in enumerate(universe.quartet):
        sel = np.flatnonzero(pair_index == k)
        if sel.size == 0:
            continue
        m = model.per_pair[(x, y)] if stitched else model
        lam = _sample_points(m.weights, u[sel])
        a_out[sel] = m.alice_column(x)[lam]
        b_out[sel] = m.bob_column(y)[lam]
    n = np.arange(1, len(schedule) + 1, dtype=np.int64)
    return TrialLog(universe, n, pair_index, a_out, b_out)


@dataclass(frozen=True)
class PairEstimate:
    mean: float
    stderr: float
    count: int


def empirical_correlations(log: TrialLog) -> dict[Pair, PairEstimate]:
    """Mean outcome product per pair, with standard error sample-std / sqrt(count).

    Pairs with no trials are absent from the result.
    """
    prod = log.a_out.astype(np.int64) * log.b_out.astype(np.int64)
    out: dict[Pair, PairEstimate] = {}
    for k, q in enumerate(log.universe.quartet):
        x = prod[log.pair_index == k]
        if x.size == 0:
            continue
        mean = float(x.mean())
        sd = float(x.std(ddof=1)) if x.size > 1 else math.nan
        out[q] = PairEstimate(mean, sd / math.sqrt(x.size), int(x.size))
    return out


class MissingPairError(ValueError):
    def __init__(self, missing: list[Pair]):
        self.missing = missing
        super().__init__(f"no trials for pair(s) {missing!r}")


@dataclass(frozen=True)
class EmpiricalReport:
    per_pair: dict[Pair, PairEstimate]
    s_hat: float
    s_stderr: float


def empirical_chsh(log: TrialLog) -> EmpiricalReport:
    """S estimated from the four empirical correlations; stderrs add in quadrature."""
    per_pair = empirical_correlations(log)
    missing = [q for q in log.universe.quartet if q not in per_pair]
    if missing:
        raise MissingPairError(missing)
    est = [per_pair[q] for q in log.universe.quartet]
    s_hat = float(est[0].mean - est[1].mean - est[2].mean - est[3].mean)
    s_stderr = math.sqrt(sum(e.stderr**2 for e in est))
    return EmpiricalReport(per_pair, s_hat, s_stderr)


def comparison_report(model: Union[LhvModel, StitchedModel], log: TrialLog) -> dict:
    """Exact vs empirical correlation per pair, plus both CHSH values."""
    if isinstance(model, StitchedModel):
        exact, exact_s = stitched_correlations(model), chsh_nonlocal(model)
    else:
        exact, exact_s = quartet_correlations(model), chsh(model)
    rep = empirical_chsh(log)
    rows = []
    for q, e in zip(log.universe.quartet, exact):
        est = rep.per_pair[q]
        rows.append(
            {
                "pair": list(q),
                "exact": float(e),
                "empirical": est.mean,
                "stderr": est.stderr,
                "count": est.count,
            }
        )
    return {
        "n_trials": len(log),
        "pairs": rows,
        "exact_s": exact_s,
        "s_hat": rep.s_hat,
        "s_stderr": rep.s_stderr,
    }


def write_trial_csv(log: TrialLog, fh: IO[str]) -> None:
    """CSV with header ``n,pair,a_out,b_out``; the pair is written ``x:y``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "pair", "a_out", "b_out"])
    for r in log:
        w.writerow([r.n, f"{r.pair[0]}:{r.pair[1]}", r.a_out, r.b_out])


@dataclass(frozen=True)
class FluctuationReport:
    fraction: float
    exact_s: float
    runs: int
    n_per_pair: int
    s_hats: np.ndarray

    @property
    def exceed_count(self) -> int:
        return int(round(self.fraction * self.runs))


def fluctuation_demo(model: LhvModel, n_per_pair: int, runs: int, seed: int) -> FluctuationReport:
    """Fraction of finite runs whose estimate has |s_hat| > 2.

    Each run has ``n_per_pair`` trials per quartet pair. Trials are i.i.d., so
    a run only needs how often each hidden point came up per pair; those
    counts are drawn as multinomials, which has the same distribution as
    :func:`run_trials` on a round-robin schedule. The comparison with 2 is
    done on integer outcome sums, so an estimate of exactly 2 never counts.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if n_per_pair < 1:
        raise ValueError("n_per_pair must be >= 1")
    exact_s = chsh(model)
    a, b = model.quartet_tables()
    # outcome product per (pair, point), pairs in CHSH order
    prod = np.stack([a[:, i] * b[:, j] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1))])
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_per_pair, model.weights, size=(runs, 4))
    sums = np.einsum("rqk,qk->rq", counts, prod)
    numerator = sums @ CHSH_SIGNS
    exceed = np.abs(numerator) > 2 * n_per_pair
    return FluctuationReport(
        float(exceed.mean()), exact_s, runs, n_per_pair, numerator / n_per_pair
    )
