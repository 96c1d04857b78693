"""Local hidden variable models over finite hidden-variable spaces.

A model pairs a discrete hidden variable (points with probability weights)
with two local response tables, one per party, giving a +/-1 outcome for
every (point, setting). Two of each party's settings form the quartet used
in the experiment; the tables may cover further settings that the experiment
never uses.

Everything here is exact up to floating-point summation: tables are stored
as integers and the per-point CHSH integrand is computed in integer arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping, Sequence, Union

import numpy as np

WEIGHT_TOL = 1e-12
BOUND_TOL = 1e-12

Pair = tuple[str, str]


class InvalidModelError(ValueError):
    """A model failed validation; ``report`` lists the failing checks."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid model: " + "; ".join(report.failures()))


class UnknownSettingError(KeyError):
    """A setting identifier that is not part of the model's universe."""

    def __str__(self) -> str:
        return str(self.args[0])


class ModelFormatError(ValueError):
    """A model document could not be parsed; ``location`` says where."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class BoundViolationError(RuntimeError):
    """|S| exceeded 2 for an LHV model. Either a bug or a counterexample."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HiddenSpace:
    """Finite hidden-variable space: point identifiers and their weights."""

    points: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(str(p) for p in self.points))
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def uniform(cls, n: int, prefix: str = "l") -> "HiddenSpace":
        return cls(tuple(f"{prefix}{i}" for i in range(n)), np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SettingUniverse:
    """All settings each party's tables cover, plus the quartet roles.

    ``quartet_alice = (1_A, 2_A)`` and ``quartet_bob = (1_B, 2_B)``; roles are
    positional, so the identifiers themselves carry no meaning.
    """

    alice_settings: tuple[str, ...]
    bob_settings: tuple[str, ...]
    quartet_alice: tuple[str, str]
    quartet_bob: tuple[str, str]

    def __post_init__(self) -> None:
        for name in ("alice_settings", "bob_settings", "quartet_alice", "quartet_bob"):
            object.__setattr__(self, name, tuple(str(s) for s in getattr(self, name)))

    @classmethod
    def minimal(cls) -> "SettingUniverse":
        """The 2x2 universe ``a1, a2`` / ``b1, b2`` with no spare settings."""
        return cls(("a1", "a2"), ("b1", "b2"), ("a1", "a2"), ("b1", "b2"))

    @property
    def quartet(self) -> tuple[Pair, Pair, Pair, Pair]:
        """Quartet pairs in CHSH order: (1,1), (1,2), (2,1), (2,2)."""
        a1, a2 = self.quartet_alice
        b1, b2 = self.quartet_bob
        return ((a1, b1), (a1, b2), (a2, b1), (a2, b2))

    def alice_index(self, a: str) -> int:
        try:
            return self.alice_settings.index(a)
        except ValueError:
            raise UnknownSettingError(f"unknown Alice setting {a!r}") from None

    def bob_index(self, b: str) -> int:
        try:
            return self.bob_settings.index(b)
        except ValueError:
            raise UnknownSettingError(f"unknown Bob setting {b!r}") from None

    def quartet_columns(self) -> tuple[list[int], list[int]]:
        """Table column indices of (1_A, 2_A) and (1_B, 2_B)."""
        return (
            [self.alice_index(a) for a in self.quartet_alice],
            [self.bob_index(b) for b in self.quartet_bob],
        )

    def check_pair(self, pair: Sequence[str]) -> Pair:
        """Return ``pair`` as a tuple if it belongs to the quartet."""
        q = (str(pair[0]), str(pair[1]))
        if q not in self.quartet:
            raise UnknownSettingError(f"setting pair {q!r} is not in the quartet")
        return q


@dataclass(frozen=True, eq=False)
class LhvModel:
    """An LHV model: hidden space, setting universe, and local response tables.

    ``alice_table[i, j]`` is Alice's outcome at point ``i`` with setting
    ``universe.alice_settings[j]``; likewise for Bob. Alice's outcome cannot
    see Bob's setting and vice versa, which is what makes the model local.

    Construction does not validate; see :func:`validate_model`.
    """

    space: HiddenSpace
    universe: SettingUniverse
    alice_table: np.ndarray
    bob_table: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alice_table", "bob_table"):
            t = np.array(getattr(self, name))
            if t.dtype.kind in "iub" or (t.dtype.kind == "f" and np.all(t == np.round(t))):
                t = t.astype(np.int64)
            object.__setattr__(self, name, _frozen(t))

    @property
    def weights(self) -> np.ndarray:
        return self.space.weights

    def alice_column(self, a: str) -> np.ndarray:
        return self.alice_table[:, self.universe.alice_index(a)]

    def bob_column(self, b: str) -> np.ndarray:
        return self.bob_table[:, self.universe.bob_index(b)]

    def quartet_tables(self) -> tuple[np.ndarray, np.ndarray]:
        """(points x 2) int64 arrays ``[A1, A2]`` and ``[B1, B2]``."""
        ai, bi = self.universe.quartet_columns()
        return self.alice_table[:, ai].astype(np.int64), self.bob_table[:, bi].astype(np.int64)

    def with_weights(self, weights: Sequence[float]) -> "LhvModel":
        return LhvModel(
            HiddenSpace(self.space.points, weights), self.universe, self.alice_table, self.bob_table
        )

    @cached_property
    def validation(self) -> "ValidationReport":
        return validate_model(self)

    def same_as(self, other: "LhvModel") -> bool:
        """Equality of every field, exact on the numeric content."""
        return (
            self.space.points == other.space.points
            and self.universe == other.universe
            and np.array_equal(self.weights, other.weights)
            and self.alice_table.shape == other.alice_table.shape
            and self.bob_table.shape == other.bob_table.shape
            and np.array_equal(self.alice_table, other.alice_table)
            and np.array_equal(self.bob_table, other.bob_table)
        )


@dataclass(frozen=True, eq=False)
class ProductLhvModel:
    """Model whose hidden variable splits as (l1, l2) with a product weight.

    Alice's outcome depends on l1 only and Bob's on l2 only, so every
    correlation collapses to a product of marginals.
    """

    space_a: HiddenSpace
    space_b: HiddenSpace
    alice_table: np.ndarray
    bob_table: np.ndarray
    universe: SettingUniverse

    def lower(self) -> LhvModel:
        """The equivalent :class:`LhvModel` on the product space."""
        na, nb = len(self.space_a), len(self.space_b)
        points = tuple(f"{p}|{r}" for p in self.space_a.points for r in self.space_b.points)
        weights = np.outer(self.space_a.weights, self.space_b.weights).reshape(-1)
        alice = np.repeat(np.asarray(self.alice_table), nb, axis=0)
        bob = np.tile(np.asarray(self.bob_table), (na, 1))
        return LhvModel(HiddenSpace(points, weights), self.universe, alice, bob)


AnyModel = Union[LhvModel, ProductLhvModel]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __bool__(self) -> bool:
        return self.passed

    def failures(self) -> list[str]:
        return [f"{c.name}: {c.detail}" if c.detail else c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _table_checks(name: str, table: np.ndarray, n_points: int, n_settings: int) -> list[Check]:
    expected = (n_points, n_settings)
    if table.ndim != 2 or table.shape != expected:
        return [
            Check(f"{name}.shape", False, f"expected {expected}, got {table.shape}"),
            Check(f"{name}.range", False, "not checked: shape mismatch"),
        ]
    bad = np.abs(table) != 1
    if bad.any():
        i, j = np.argwhere(bad)[0]
        return [
            Check(f"{name}.shape", True),
            Check(f"{name}.range", False, f"entry [{i}, {j}] = {table[i, j]!r}, outputs must be -1 or +1"),
        ]
    return [Check(f"{name}.shape", True), Check(f"{name}.range", True)]


def validate_model(model: LhvModel) -> ValidationReport:
    """Check every structural invariant of ``model`` and report each one.

    Failures are reported, never raised.
    """
    checks: list[Check] = []
    space, uni = model.space, model.universe
    w = space.weights
    n = len(space.points)

    checks.append(Check("space.nonempty", n >= 1, "" if n else "no hidden-variable points"))
    checks.append(
        Check(
            "space.weights_length",
            w.shape == (n,),
            "" if w.shape == (n,) else f"{w.size} weights for {n} points",
        )
    )
    finite = bool(np.isfinite(w).all())
    nonneg = finite and bool((w >= 0).all())
    checks.append(Check("space.weights_nonnegative", nonneg, "" if nonneg else "negative or non-finite weight"))
    total = float(w.sum()) if finite else float("nan")
    norm_ok = finite and abs(total - 1.0) <= WEIGHT_TOL
    checks.append(Check("space.weights_normalized", norm_ok, "" if norm_ok else f"weights sum to {total!r}"))

    for party, settings, quartet in (
        ("alice", uni.alice_settings, uni.quartet_alice),
        ("bob", uni.bob_settings, uni.quartet_bob),
    ):
        enough = len(settings) >= 2
        checks.append(Check(f"universe.{party}_size", enough, "" if enough else "fewer than 2 settings"))
        unique = len(set(settings)) == len(settings)
        checks.append(Check(f"universe.{party}_unique", unique, "" if unique else "duplicate setting identifier"))
        ok_len = len(quartet) == 2
        subset = ok_len and all(s in settings for s in quartet)
        checks.append(
            Check(f"universe.{party}_quartet_subset", subset, "" if subset else f"{quartet!r} not in {settings!r}")
        )
        distinct = ok_len and quartet[0] != quartet[1]
        checks.append(
            Check(f"universe.{party}_quartet_distinct", distinct, "" if distinct else "quartet settings coincide")
        )

    checks += _table_checks("alice_table", model.alice_table, n, len(uni.alice_settings))
    checks += _table_checks("bob_table", model.bob_table, n, len(uni.bob_settings))
    return ValidationReport(tuple(checks))


def ensure_valid(model: LhvModel) -> LhvModel:
    report = model.validation
    if not report.passed:
        raise InvalidModelError(report)
    return model


@dataclass(frozen=True)
class CorrelationReport:
    pair: Pair
    value: float


def correlation(model: LhvModel, a: str, b: str) -> CorrelationReport:
    """E(a, b): the weighted mean of A(l, a) * B(l, b) over hidden points."""
    ensure_valid(model)
    return CorrelationReport((a, b), _correlation(model, a, b))


def _correlation(model: LhvModel, a: str, b: str) -> float:
    prod = model.alice_column(a) * model.bob_column(b)
    return float(np.dot(model.weights, prod.astype(np.float64)))


def quartet_correlations(model: LhvModel) -> np.ndarray:
    """The four quartet correlations in CHSH order."""
    ensure_valid(model)
    return np.array([_correlation(model, a, b) for a, b in model.universe.quartet])


def chsh_from_correlations(e: Sequence[float]) -> float:
    """S = E11 - E12 - E21 - E22."""
    return float(e[0] - e[1] - e[2] - e[3])


def chsh(model: LhvModel) -> float:
    """CHSH value from the four quartet correlations.

    Raises :class:`BoundViolationError` if |S| > 2 + 1e-12, which no valid
    model can produce.
    """
    s = chsh_from_correlations(quartet_correlations(model))
    if abs(s) > 2.0 + BOUND_TOL:
        raise BoundViolationError(f"|S| = {abs(s)!r} exceeds 2 for a local model")
    return s


def integrand_table(model: LhvModel) -> np.ndarray:
    """Per-point A1(B1 - B2) - A2(B1 + B2) as an int64 array."""
    ensure_valid(model)
    a, b = model.quartet_tables()
    return a[:, 0] * (b[:, 0] - b[:, 1]) - a[:, 1] * (b[:, 0] + b[:, 1])


def integrand_values(model: LhvModel) -> list[tuple[str, int]]:
    """(point, integrand value) for every hidden point; each value is +2 or -2."""
    values = integrand_table(model)
    return [(p, int(v)) for p, v in zip(model.space.points, values)]


@dataclass(frozen=True)
class FactorizationReport:
    alice_marginals: dict[str, float]
    bob_marginals: dict[str, float]
    residuals: dict[Pair, float]
    tol: float

    @property
    def per_pair(self) -> dict[Pair, bool]:
        return {q: r <= self.tol for q, r in self.residuals.items()}

    @property
    def factorized(self) -> bool:
        return all(self.per_pair.values())


def factorization_check(model: AnyModel, tol: float = 1e-12) -> FactorizationReport:
    """Compare E(a, b) with E_A(a) * E_B(b) for every pair of settings."""
    if isinstance(model, ProductLhvModel):
        model = model.lower()
    ensure_valid(model)
    w = model.weights
    uni = model.universe
    ea = w @ model.alice_table.astype(np.float64)
    eb = w @ model.bob_table.astype(np.float64)
    residuals: dict[Pair, float] = {}
    for i, a in enumerate(uni.alice_settings):
        for j, b in enumerate(uni.bob_settings):
            e = _correlation(model, a, b)
            residuals[(a, b)] = abs(e - ea[i] * eb[j])
    return FactorizationReport(
        dict(zip(uni.alice_settings, map(float, ea))),
        dict(zip(uni.bob_settings, map(float, eb))),
        residuals,
        tol,
    )


# JSON model documents -------------------------------------------------------

_FIELDS = ("points", "weights", "alice_settings", "bob_settings", "quartet", "A", "B")


def model_to_dict(model: LhvModel) -> dict[str, Any]:
    uni = model.universe
    return {
        "points": list(model.space.points),
        "weights": [float(x) for x in model.weights],
        "alice_settings": list(uni.alice_settings),
        "bob_settings": list(uni.bob_settings),
        "quartet": {
            "a1": uni.quartet_alice[0],
            "a2": uni.quartet_alice[1],
            "b1": uni.quartet_bob[0],
            "b2": uni.quartet_bob[1],
        },
        "A": [[int(x) for x in row] for row in model.alice_table],
        "B": [[int(x) for x in row] for row in model.bob_table],
    }


def _require_list(doc: Mapping[str, Any], key: str) -> list:
    value = doc[key]
    if not isinstance(value, list):
        raise ModelFormatError(f"expected an array, got {type(value).__name__}", key)
    return value


def _table_from_json(rows: list, key: str, n_cols: int) -> np.ndarray:
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ModelFormatError("expected an array of rows", f"{key}[{i}]")
        if len(row) != n_cols:
            raise ModelFormatError(f"row has {len(row)} entries, expected {n_cols}", f"{key}[{i}]")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ModelFormatError(f"non-numeric entry {x!r}", f"{key}[{i}][{j}]")
    return np.array(rows, dtype=np.float64).reshape(len(rows), n_cols)


def model_from_dict(doc: Mapping[str, Any]) -> LhvModel:
    """Build a model from a JSON document; raises :class:`ModelFormatError`.

    Only the document's shape is checked here; call :func:`validate_model`
    for the model invariants.
    """
    if not isinstance(doc, Mapping):
        raise ModelFormatError("top level must be an object")
    missing = [k for k in _FIELDS if k not in doc]
    if missing:
        raise ModelFormatError(f"missing field(s) {', '.join(missing)}")
    points = _require_list(doc, "points")
    weights = _require_list(doc, "weights")
    for i, x in enumerate(weights):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ModelFormatError(f"non-numeric weight {x!r}", f"weights[{i}]")
    alice = [str(s) for s in _require_list(doc, "alice_settings")]
    bob = [str(s) for s in _require_list(doc, "bob_settings")]
    quartet = doc["quartet"]
    if not isinstance(quartet, Mapping) or any(k not in quartet for k in ("a1", "a2", "b1", "b2")):
        raise ModelFormatError("must be an object with a1, a2, b1, b2", "quartet")
    uni = SettingUniverse(alice, bob, (quartet["a1"], quartet["a2"]), (quartet["b1"], quartet["b2"]))
    A = _table_from_json(_require_list(doc, "A"), "A", len(alice))
    B = _table_from_json(_require_list(doc, "B"), "B", len(bob))
    return LhvModel(HiddenSpace(points, weights), uni, A, B)


def dumps_model(model: LhvModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def loads_model(text: str) -> LhvModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return model_from_dict(doc)


def deterministic_model(a1: int, a2: int, b1: int, b2: int, universe: SettingUniverse | None = None) -> LhvModel:
    """Single-point model with the given outcomes at the quartet settings.

    Settings outside the quartet answer +1.
    """
    uni = universe or SettingUniverse.minimal()
    A = np.ones((1, len(uni.alice_settings)), dtype=np.int64)
    B = np.ones((1, len(uni.bob_settings)), dtype=np.int64)
    ai, bi = uni.quartet_columns()
    A[0, ai] = (a1, a2)
    B[0, bi] = (b1, b2)
    return LhvModel(HiddenSpace(("l0",), [1.0]), uni, A, B)

