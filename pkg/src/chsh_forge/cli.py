"""Command-line entry point: ``chsh-forge <command> [options]``.

Exit codes: 0 success, 1 usage, 2 bad input, 3 bound violation (falsification),
4 pool too small to match every target.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import experiment, optimizer, pool
from .core import (
    BoundViolationError,
    InvalidModelError,
    LhvModel,
    ModelFormatError,
    SettingUniverse,
    factorization_check,
    integrand_values,
    loads_model,
    model_to_dict,
    chsh_from_correlations,
    quartet_correlations,
    validate_model,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_FALSIFIED, EXIT_POOL = 0, 1, 2, 3, 4
ROUTE_TOL = 1e-12
STOCHASTIC = {"hunt", "pool-select", "estimate"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int | None
    count: int | None
    space_size: int
    tol: float
    output_path: Path | None
    format: str

    def __post_init__(self) -> None:
        if self.command in STOCHASTIC and self.seed is None:
            raise UsageError(f"{self.command} requires --seed")
        if self.count is not None and self.count < 1:
            raise UsageError("--count must be >= 1")
        if self.space_size < 1:
            raise UsageError("--space-size must be >= 1")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")


def _dump(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _load_model(path: str) -> LhvModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(exc.strerror or str(exc), path) from exc
    try:
        model = loads_model(text)
    except ModelFormatError as exc:
        raise ModelFormatError(str(exc), path) from exc
    report = validate_model(model)
    if not report.passed:
        raise ModelFormatError("invalid model: " + "; ".join(report.failures()), path)
    return model


def cmd_verify(path: str, out: Path | None) -> int:
    model = _load_model(path)
    corr = quartet_correlations(model)
    s_corr = chsh_from_correlations(corr)
    s_brute = optimizer.brute_force_chsh(model)
    fact = factorization_check(model)
    bound_ok = abs(s_corr) <= 2.0 + optimizer.VIOLATION_TOL and abs(s_brute) <= 2.0 + optimizer.VIOLATION_TOL
    routes_agree = abs(s_corr - s_brute) <= ROUTE_TOL
    doc = {
        "correlations": [{"pair": list(q), "value": float(e)} for q, e in zip(model.universe.quartet, corr)],
        "s_correlations": s_corr,
        "s_integrand": s_brute,
        "routes_agree": routes_agree,
        "bound_ok": bound_ok,
        "integrand": [{"point": p, "value": v} for p, v in integrand_values(model)],
        "factorization": {
            "factorized": fact.factorized,
            "alice_marginals": fact.alice_marginals,
            "bob_marginals": fact.bob_marginals,
            "residuals": [{"pair": list(q), "residual": r} for q, r in fact.residuals.items()],
        },
    }
    _emit(_dump(doc), out)
    return EXIT_OK if bound_ok and routes_agree else EXIT_FALSIFIED


def cmd_hunt(cfg: RunConfig, universe: SettingUniverse) -> int:
    report = optimizer.hunt(cfg.seed, cfg.count, cfg.space_size, universe)
    _emit(_dump(report.to_dict()), cfg.output_path)
    if report.violations:
        events = []
        for e in report.falsifications:
            model = pool.random_model(e.seed, cfg.space_size, universe)
            events.append({"event": "FALSIFICATION", "index": e.index, "seed": e.seed, "s": e.s, "model": model_to_dict(model)})
        target = Path(str(cfg.output_path) + ".falsification.json") if cfg.output_path else Path("falsification.json")
        target.write_text(_dump(events))
        print(f"FALSIFICATION: {report.violations} model(s) with |S| > 2, see {target}", file=sys.stderr)
        return EXIT_FALSIFIED
    return EXIT_OK


def cmd_stitch_demo(cfg: RunConfig, universe: SettingUniverse, targets: Sequence[float], pool_select: bool) -> int:
    qt = pool.QuantumTargets.from_values(universe, targets)
    doc: dict[str, Any] = {"targets": [float(t) for t in targets], "direct": pool.stitch_report(pool.stitch_targets(qt, universe))}
    code = EXIT_OK
    if pool_select:
        entries = pool.draw_pool(cfg.seed, cfg.count, universe, cfg.space_size)
        sel = pool.select_matching_trials(entries, qt, cfg.tol)
        section: dict[str, Any] = {
            "pool_size": cfg.count,
            "tol": cfg.tol,
            "matches": [{"pair": list(q), "trial_index": n} for q, n in sel.matches.items()],
            "missing": [list(q) for q in sel.missing],
        }
        if sel.complete:
            section.update(pool.stitch_report(pool.stitch_selection(entries, sel), sel.matches))
        else:
            code = EXIT_POOL
        doc["pool_selected"] = section
    _emit(_dump(doc), cfg.output_path)
    return code


def cmd_pool_select(cfg: RunConfig, universe: SettingUniverse, targets: Sequence[float]) -> int:
    qt = pool.QuantumTargets.from_values(universe, targets)
    entries = pool.draw_pool(cfg.seed, cfg.count, universe, cfg.space_size)
    sel = pool.select_matching_trials(entries, qt, cfg.tol)
    if cfg.output_path is not None:
        with cfg.output_path.open("w") as fh:
            pool.write_manifest(entries, fh)
    doc = {
        "pool_size": cfg.count,
        "tol": cfg.tol,
        "matches": [{"pair": list(q), "trial_index": n} for q, n in sel.matches.items()],
        "missing": [list(q) for q in sel.missing],
    }
    sys.stdout.write(_dump(doc))
    return EXIT_OK if sel.complete else EXIT_POOL


def cmd_estimate(cfg: RunConfig, path: str) -> int:
    model = _load_model(path)
    log = experiment.run_trials(model, experiment.round_robin_schedule(model.universe, cfg.count), cfg.seed)
    report = experiment.comparison_report(model, log)
    if cfg.format == "csv":
        if cfg.output_path is None:
            experiment.write_trial_csv(log, sys.stdout)
        else:
            with cfg.output_path.open("w", newline="") as fh:
                experiment.write_trial_csv(log, fh)
            sys.stdout.write(_dump(report))
    else:
        _emit(_dump(report), cfg.output_path)
    return EXIT_OK


def cmd_enumerate(cfg: RunConfig) -> int:
    rows = optimizer.enumerate_deterministic()
    if cfg.format == "csv":
        lines = ["a1,a2,b1,b2,s"] + [f"{s.a1},{s.a2},{s.b1},{s.b2},{v}" for s, v in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = _dump([{**s._asdict(), "s": v} for s, v in rows])
    _emit(text, cfg.output_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (required by stochastic commands)")
    common.add_argument("--count", type=int, help="number of models / trials per pair")
    common.add_argument("--space-size", type=int, default=8, help="hidden-variable points per random model")
    common.add_argument("--tol", type=float, default=pool.DEFAULT_TOL, help="target matching tolerance")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="chsh-forge", description="LHV model CHSH verification and simulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("verify", parents=[common], help="check a model file against |S| <= 2")
    p.add_argument("model_file")
    sub.add_parser("hunt", parents=[common], help="search random models for a CHSH violation")
    p = sub.add_parser("stitch-demo", parents=[common], help="stitch one model per setting pair")
    p.add_argument("--pool-select", action="store_true", help="also select components from a random pool")
    p.add_argument("--targets", type=float, nargs=4, metavar=("E11", "E12", "E21", "E22"))
    p = sub.add_parser("pool-select", parents=[common], help="draw a pool and select matching trials")
    p.add_argument("--targets", type=float, nargs=4, metavar=("E11", "E12", "E21", "E22"))
    p = sub.add_parser("estimate", parents=[common], help="simulate trials and estimate S")
    p.add_argument("model_file")
    sub.add_parser("enumerate", parents=[common], help="list the 16 deterministic strategies")
    return parser


_DEFAULT_COUNTS = {"hunt": None, "stitch-demo": 10_000, "pool-select": 10_000, "estimate": None}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    count = args.count if args.count is not None else _DEFAULT_COUNTS.get(args.command)
    try:
        if args.command in ("hunt", "estimate") and count is None:
            raise UsageError(f"{args.command} requires --count")
        if getattr(args, "pool_select", False) and args.seed is None:
            raise UsageError("stitch-demo --pool-select requires --seed")
        cfg = RunConfig(args.command, args.seed, count, args.space_size, args.tol, args.out, args.format)
    except UsageError as exc:
        print(f"chsh-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    universe = SettingUniverse.minimal()
    targets = getattr(args, "targets", None) or pool.QuantumTargets.singlet(universe).values(universe).tolist()
    try:
        if cfg.command == "verify":
            return cmd_verify(args.model_file, cfg.output_path)
        if cfg.command == "hunt":
            return cmd_hunt(cfg, universe)
        if cfg.command == "stitch-demo":
            return cmd_stitch_demo(cfg, universe, targets, args.pool_select)
        if cfg.command == "pool-select":
            return cmd_pool_select(cfg, universe, targets)
        if cfg.command == "estimate":
            return cmd_estimate(cfg, args.model_file)
        return cmd_enumerate(cfg)
    except (ModelFormatError, InvalidModelError, ValueError) as exc:
        print(f"chsh-forge: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BoundViolationError as exc:
        print(f"FALSIFICATION: {exc}", file=sys.stderr)
        return EXIT_FALSIFIED


if __name__ == "__main__":
    sys.exit(main())
