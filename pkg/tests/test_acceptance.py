"""Exit criteria for the package, one test per criterion.

Run ``pytest tests/test_acceptance.py`` to see the PASS/FAIL summary.
"""

import math
import time

import numpy as np
import pytest

from chsh_forge import cli
from chsh_forge.core import (
    HiddenSpace,
    LhvModel,
    SettingUniverse,
    chsh,
    deterministic_model,
    dumps_model,
    integrand_table,
)
from chsh_forge.experiment import empirical_chsh, fluctuation_demo, round_robin_schedule, run_trials
from chsh_forge.optimizer import brute_force_chsh, enumerate_deterministic, hunt
from chsh_forge.pool import (
    QuantumTargets,
    chsh_nonlocal,
    component_table,
    construct_target_model,
    draw_pool,
    pool_quartet_correlations,
    random_model,
    stitch,
)

from conftest import record_criterion

UNIVERSE = SettingUniverse.minimal()
WIDE = SettingUniverse(("x", "a1", "a2"), ("b1", "y", "b2", "z"), ("a1", "a2"), ("b1", "b2"))


def two_point_s2():
    return LhvModel(HiddenSpace(("l0", "l1"), [0.5, 0.5]), UNIVERSE, [[1, 1], [-1, 1]], [[1, -1], [-1, 1]])


def golden_models():
    models = [deterministic_model(*s, UNIVERSE) for s, _ in enumerate_deterministic()]
    models.append(two_point_s2())
    models += [construct_target_model(q, c, UNIVERSE) for q in UNIVERSE.quartet for c in (1 / math.sqrt(2), -1 / math.sqrt(2), 1.0, 0.0)]
    return models


@pytest.mark.parametrize("space_size", [2, 8, 64])
def test_criterion_1_bound_theorem(space_size):
    start = time.perf_counter()
    rep = hunt(2024 + space_size, 1_000_000, space_size)
    elapsed = time.perf_counter() - start
    ok = rep.violations == 0 and rep.max_abs_s <= 2 + 1e-12 and rep.n_models == 1_000_000
    record_criterion(
        1,
        f"hunt 10^6 models, space_size={space_size}",
        ok,
        f"violations={rep.violations}, max|S|={rep.max_abs_s!r}, {elapsed:.1f}s",
    )


def test_criterion_2_integrand_reduction():
    n_exact = 0
    worst = 0.0
    total = 0
    for seed, size, uni in ((1, 2, UNIVERSE), (2, 8, UNIVERSE), (3, 16, WIDE), (4, 64, UNIVERSE)):
        for entry in draw_pool(seed, 25_000, uni, size):
            values = integrand_table(entry.model)
            n_exact += bool(np.all((values == 2) | (values == -2)))
            mean = float(np.dot(entry.model.weights, values))
            worst = max(worst, abs(mean - chsh(entry.model)))
            total += 1
    ok = total == 100_000 and n_exact == total and worst <= 1e-12
    record_criterion(2, "integrand is exactly +/-2 and averages to S", ok, f"{n_exact}/{total} exact, max diff {worst:.2e}")


def test_criterion_3_deterministic_enumeration():
    start = time.perf_counter()
    rows = enumerate_deterministic()
    elapsed_ms = (time.perf_counter() - start) * 1e3
    values = [v for _, v in rows]
    ok = len(rows) == 16 and set(values) == {-2, 2} and values.count(2) == 8 and elapsed_ms < 100
    record_criterion(3, "16 deterministic strategies, 8 at +2 and 8 at -2", ok, f"{elapsed_ms:.3f} ms")


def test_criterion_4_stitched_quantum_demo(capsys):
    targets = QuantumTargets.singlet(UNIVERSE)
    components = {q: construct_target_model(q, targets.per_pair[q], UNIVERSE) for q in UNIVERSE.quartet}
    s_star = chsh_nonlocal(stitch(components))
    table = component_table(stitch(components))
    component_ok = all(abs(row["component_chsh"]) <= 2 for row in table)

    code = cli.main(["stitch-demo"])
    out = capsys.readouterr().out
    emitted = '"components"' in out and '"component_chsh"' in out and code == 0
    ok = abs(s_star - 2 * math.sqrt(2)) <= 1e-9 and component_ok and emitted
    comps = ", ".join(f"{row['component_chsh']:+.3f}" for row in table)
    record_criterion(4, "stitched S* = 2*sqrt(2) while each component has |S| <= 2", ok, f"S*={s_star!r}, component S: {comps}")


@pytest.mark.parametrize("seed", [0, 1])
def test_criterion_5_no_single_model_match(seed):
    pool = draw_pool(seed, 100_000, UNIVERSE, 8)
    corr = pool_quartet_correlations(pool)
    targets = QuantumTargets.singlet(UNIVERSE).values(UNIVERSE)
    dist = np.max(np.abs(corr - targets), axis=1)
    n_match = int(np.sum(dist <= 0.05))
    record_criterion(
        5,
        f"no pool model matches all four targets at tol 0.05 (seed {seed})",
        n_match == 0,
        f"matches={n_match}, closest max-deviation={dist.min():.4f}",
    )


@pytest.mark.parametrize(
    "name,model",
    [
        ("deterministic S=-2", deterministic_model(1, 1, 1, 1, UNIVERSE)),
        ("two-point S=2", two_point_s2()),
        ("random size-8", random_model(606, 8, UNIVERSE)),
    ],
)
def test_criterion_6_estimator_consistency(name, model):
    s = chsh(model)
    schedule = round_robin_schedule(UNIVERSE, 100_000)
    hits = 0
    for seed in range(100):
        rep = empirical_chsh(run_trials(model, schedule, seed))
        hits += abs(rep.s_hat - s) <= 5 * rep.s_stderr
    record_criterion(6, f"|s_hat - S| <= 5 stderr, {name}", hits >= 99, f"{hits}/100 runs, S={s!r}")


def test_criterion_7_fluctuation_counter_illustration():
    rep = fluctuation_demo(two_point_s2(), n_per_pair=100, runs=10_000, seed=7)
    exceed = float(np.mean(rep.s_hats > 2))
    ok = rep.exact_s == 2.0 and exceed > 0.3 and rep.fraction == exceed
    record_criterion(7, "finite runs exceed 2 while exact S = 2", ok, f"fraction={exceed:.4f}, exact S={rep.exact_s!r}")


def test_criterion_8_oracle_equivalence():
    models = [random_model(seed, 8, UNIVERSE) for seed in range(10_000)] + golden_models()
    worst = max(abs(brute_force_chsh(m) - chsh(m)) for m in models)
    record_criterion(8, "integrand route equals correlation route", worst <= 1e-12, f"{len(models)} models, max diff {worst:.2e}")


def _run_twice(argv_for, workdir, capsys):
    workdir.mkdir()
    outputs = []
    for tag in ("first", "second"):
        path = workdir / tag
        code = cli.main(argv_for(path))
        stdout = capsys.readouterr().out
        outputs.append((code, stdout, path.read_bytes()))
    return outputs[0] == outputs[1]


def test_criterion_9_determinism(tmp_path, capsys):
    model_path = tmp_path / "model.json"
    model_path.write_text(dumps_model(random_model(5, 8, UNIVERSE)))
    m = str(model_path)
    commands = {
        "verify": lambda out: ["verify", m, "--out", str(out)],
        "hunt": lambda out: ["hunt", "--seed", "11", "--count", "20000", "--out", str(out)],
        "stitch-demo": lambda out: ["stitch-demo", "--pool-select", "--seed", "3", "--count", "20000", "--out", str(out)],
        "pool-select": lambda out: ["pool-select", "--seed", "3", "--count", "5000", "--out", str(out)],
        "estimate-json": lambda out: ["estimate", m, "--seed", "2", "--count", "5000", "--out", str(out)],
        "estimate-csv": lambda out: ["estimate", m, "--seed", "2", "--count", "500", "--format", "csv", "--out", str(out)],
        "enumerate": lambda out: ["enumerate", "--out", str(out)],
    }
    failed = [name for name, argv in commands.items() if not _run_twice(argv, tmp_path / name, capsys)]
    record_criterion(
        9, "seeded commands rerun byte-identically", not failed, f"{len(commands)} commands" + (f", differ: {failed}" if failed else "")
    )
