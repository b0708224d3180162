"""Command-line entry point.

Exit codes: 0 ok, 2 schema, 3 validation, 4 order violation,
5 numerical failure, 6 unresolved event.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import COMMANDS, ENV_PREFIX, RunConfig, parse_config
from .errors import TstError
from .limit import build_limit_profile, verify_convergence
from .model import DemographicModel, check_assumptions, compute_fitness
from .ode import (
    MigrationMode,
    OdeSystemSpec,
    detect_crossings,
    integrate,
    simulate_two_scale,
    write_events_csv,
    write_mutations_jsonl,
)
from .stability import DimorphicSystem, basin_check, classify_equilibria
from .tst import export_tree, path_jsonl, simulate_tst

MAX_JUMPS = 100_000


def replica_seeds(seed: int, replicas: int) -> list[int]:
    if replicas == 1:
        return [seed]
    children = np.random.SeedSequence(seed).spawn(replicas)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _mode(run: RunConfig, default: MigrationMode) -> MigrationMode:
    return default if run.migration_mode is None else MigrationMode.parse(run.migration_mode)


def _epsilon(model: DemographicModel, run: RunConfig) -> float:
    return run.eps[0] if run.eps else model.epsilon


def cmd_check(model, run, out: Path) -> None:
    report = check_assumptions(model)
    _write_json(out / "assumptions.json", report.to_dict())
    fit = compute_fitness(model)  # raises OrderViolation after the report is on disk
    _write_json(out / "fitness.json", {
        "ids": list(fit.ids),
        "xi_bar": fit.xi_bar.tolist(),
        "f": fit.f.tolist(),
        "ordered_ids": list(fit.ordered_ids),
    })


def cmd_simulate_ode(model, run, out: Path) -> None:
    eps = _epsilon(model, run)
    m = model.with_scales(epsilon=eps)
    t_end = run.t_end if run.t_end is not None else 30.0 * np.log(1.0 / eps)
    traj = integrate(OdeSystemSpec(m, _mode(run, MigrationMode.BIRTH_WEIGHTED)), t_end, run.tol)
    eta = run.eta if run.eta is not None else 0.05 * float(np.min(m.xi_bar))
    traj.to_csv(out / "trajectory.csv")
    write_events_csv(detect_crossings(traj, eta), out / "events.csv")


def cmd_limit_profile(model, run, out: Path) -> None:
    profile = build_limit_profile(compute_fitness(model), model)
    (out / "profile.json").write_text(profile.to_json() + "\n")


def cmd_verify(model, run, out: Path) -> None:
    profile = build_limit_profile(compute_fitness(model), model)
    eps = run.eps or (1e-4, 1e-6)
    report = verify_convergence(model, profile, eps, run.eta, run.tol, _mode(run, MigrationMode.BIRTH_WEIGHTED))
    report.to_csv(out / "convergence.csv")
    report.slopes_to_csv(out / "slopes.csv")


def cmd_simulate_tst(model, run, out: Path) -> None:
    t_end = 10.0 if run.t_end is None else run.t_end
    for k, seed in enumerate(replica_seeds(run.seed, run.replicas)):
        target = out if run.replicas == 1 else out / f"replica_{k:04d}"
        target.mkdir(parents=True, exist_ok=True)
        path = simulate_tst(model, t_end, seed, max_jumps=MAX_JUMPS)
        newick, adjacency = export_tree(path)
        (target / "path.jsonl").write_text(path_jsonl(path))
        (target / "tree.nwk").write_text(newick + "\n")
        _write_json(target / "tree.json", adjacency)


def cmd_simulate_two_scale(model, run, out: Path) -> None:
    t_end = 1.0 if run.t_end is None else run.t_end
    m = model.with_scales(epsilon=_epsilon(model, run))
    for k, seed in enumerate(replica_seeds(run.seed, run.replicas)):
        target = out if run.replicas == 1 else out / f"replica_{k:04d}"
        target.mkdir(parents=True, exist_ok=True)
        traj, events, _ = simulate_two_scale(m, t_end, seed, mode=_mode(run, MigrationMode.PLAIN), tol=run.tol)
        traj.to_csv(target / "trajectory.csv")
        write_mutations_jsonl(events, target / "mutations.jsonl")


def cmd_stability(model, run, out: Path) -> None:
    ids = compute_fitness(model).ordered_ids
    pairs = []
    for x, y in zip(ids, ids[1:]):
        system = DimorphicSystem.from_model(model, x, y)
        report = classify_equilibria(system)
        ratio = basin_check(system) if len(report.stable) == 1 else None
        pairs.append({"x": x, "y": y, "equilibria": json.loads(report.to_json()), "basin_ratio": ratio})
    _write_json(out / "stability.json", pairs)


HANDLERS = {
    "check": cmd_check,
    "simulate-ode": cmd_simulate_ode,
    "limit-profile": cmd_limit_profile,
    "verify-convergence": cmd_verify,
    "simulate-tst": cmd_simulate_tst,
    "simulate-two-scale": cmd_simulate_two_scale,
    "stability": cmd_stability,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, run: RunConfig, wall: float, status: int) -> None:
    files = {
        str(p.relative_to(out)): _sha256(p)
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }
    _write_json(out / "manifest.json", {
        "command": run.command,
        "exit_code": status,
        "seed": run.seed,
        "replicas": run.replicas,
        "config": run.model_path,
        "config_sha256": run.config_sha256,
        "versions": {
            "tstsim": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": wall,
        "files": files,
    })


def run(model: DemographicModel, config: RunConfig) -> int:
    """Execute one command, write its artifacts and a manifest; return the exit code."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status = 0
    try:
        HANDLERS[config.command](model, config, out)
    except TstError as exc:
        status = exc.exit_code
        (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    write_manifest(out, config, time.perf_counter() - start, status)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tstsim",
        description="Finite-trait Lotka-Volterra dynamics with migration and the trait substitution tree.",
        epilog=f"Environment overrides: {ENV_PREFIX}SEED, {ENV_PREFIX}EPS (comma list), {ENV_PREFIX}ETA, "
        f"{ENV_PREFIX}T_END, {ENV_PREFIX}TOL, {ENV_PREFIX}REPLICAS, {ENV_PREFIX}MIGRATION_MODE, {ENV_PREFIX}OUT.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="model/run JSON document")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--eps", type=float, action="append", help="migration scale; repeat for a sweep")
    p.add_argument("--eta", type=float, help="crossing level")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--migration-mode", dest="migration_mode", choices=[m.value for m in MigrationMode])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    if overrides.get("eps"):
        overrides["eps"] = tuple(overrides["eps"])
    try:
        text = Path(args.config).read_text()
        model, config = parse_config(text, overrides)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except TstError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(model, replace(config, model_path=args.config))


if __name__ == "__main__":
    sys.exit(main())
