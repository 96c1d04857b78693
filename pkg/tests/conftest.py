import math

import numpy as np
import pytest
from hypothesis import strategies as st

from chsh_forge.core import HiddenSpace, LhvModel, SettingUniverse, deterministic_model

INV_SQRT2 = 1 / math.sqrt(2)


@pytest.fixture
def universe():
    return SettingUniverse.minimal()


@pytest.fixture
def wide_universe():
    """Model settings beyond the experimental quartet."""
    return SettingUniverse(("x", "a1", "a2"), ("b1", "y", "b2", "z"), ("a1", "a2"), ("b1", "b2"))


@pytest.fixture
def all_plus(universe):
    return deterministic_model(1, 1, 1, 1, universe)


@pytest.fixture
def two_point_s2(universe):
    """Two equally likely points with E = (1, -1, 0, 0) and S = 2."""
    A = np.array([[1, 1], [-1, 1]])  # columns a1, a2
    B = np.array([[1, -1], [-1, 1]])  # columns b1, b2
    return LhvModel(HiddenSpace(("l0", "l1"), [0.5, 0.5]), universe, A, B)


def model_strategy(max_points=6, max_extra=2):
    """Arbitrary valid LHV models, including spare settings outside the quartet."""

    @st.composite
    def build(draw):
        k = draw(st.integers(1, max_points))
        na = 2 + draw(st.integers(0, max_extra))
        nb = 2 + draw(st.integers(0, max_extra))
        raw = draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k).filter(lambda w: sum(w) > 1e-3))
        w = np.array(raw) / math.fsum(raw)
        w[-1] = 1.0 - math.fsum(w[:-1])
        if w[-1] < 0:
            w[-1] = 0.0
        signs = st.sampled_from((-1, 1))
        A = np.array(draw(st.lists(st.lists(signs, min_size=na, max_size=na), min_size=k, max_size=k)))
        B = np.array(draw(st.lists(st.lists(signs, min_size=nb, max_size=nb), min_size=k, max_size=k)))
        alice = tuple(f"a{i}" for i in range(na))
        bob = tuple(f"b{i}" for i in range(nb))
        qa = tuple(draw(st.permutations(alice))[:2])
        qb = tuple(draw(st.permutations(bob))[:2])
        uni = SettingUniverse(alice, bob, qa, qb)
        return LhvModel(HiddenSpace(tuple(f"l{i}" for i in range(k)), w), uni, A, B)

    return build()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, title, passed, detail=""):
    """Log one acceptance line (printed in the terminal summary) and assert it."""
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title}" + (f" -- {detail}" if detail else ""))
    assert passed, f"criterion {number} failed: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
