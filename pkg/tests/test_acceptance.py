"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import literal_next_support
from scipy import stats

from tstsim import fixtures
from tstsim.cli import main
from tstsim.config import model_document
from tstsim.crosscheck import TV_TOL, compare_one_step, relaxed_start
from tstsim.limit import (
    ConvergenceReport,
    build_limit_profile,
    limit_profile_for,
    verify_convergence,
)
from tstsim.model import OrderedTraitSequence, compute_fitness, insert_at
from tstsim.ode import OdeSystemSpec, integrate
from tstsim.stability import (
    basin_check,
    classify_equilibria,
    random_sign_condition_system,
)
from tstsim.tst import jump_rate, sample_jump, simulate_tst

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def canonical_sweep():
    model = fixtures.canonical()
    profile = limit_profile_for(model)
    timings = {}
    rows = []
    for eps in (1e-4, 1e-6):
        t0 = time.perf_counter()
        rep = verify_convergence(model, profile, [eps], eta=0.05)
        timings[eps] = time.perf_counter() - t0
        rows += rep.rows
    return ConvergenceReport(0.05, rows), timings


def test_criterion_1_invasion_time(canonical_sweep):
    rep, timings = canonical_sweep
    e4, e6 = rep.error("invade 1", 1e-4), rep.error("invade 1", 1e-6)
    ok = abs(e4) <= 0.05 and abs(e6) <= 0.03 and abs(e6) < abs(e4) and max(timings.values()) < 10
    record(1, "invasion-time convergence", ok,
           f"rel error {e4:+.4f} at eps=1e-4 (tol 0.05), {e6:+.4f} at eps=1e-6 (tol 0.03), "
           f"decreasing {abs(e6) < abs(e4)}, "
           f"runtime {max(timings.values()):.2f}s")


def test_criterion_2_recovery_time(canonical_sweep):
    rep, _ = canonical_sweep
    e6 = rep.error("recover 0", 1e-6)
    record(2, "recovery-time convergence", abs(e6) <= 0.05, f"rel error {e6:+.4f} at eps=1e-6 (tol 0.05)")


def test_criterion_3_equilibrium_configuration():
    eps = 1e-9
    details = []
    ok = True
    for make, target in ((fixtures.three_trait, {0: 1.0, 2: 3.0}), (fixtures.four_trait, {1: 2.0, 3: 4.0})):
        model = make(eps)
        profile = limit_profile_for(model)
        assert profile.final == pytest.approx(target)
        t_end = 3.0 * profile.switch_times[-1] * np.log(1 / eps)
        traj = integrate(OdeSystemSpec(model), t_end, tol=1e-10)
        want = np.array([target.get(i, 0.0) for i in model.ids])
        tv = float(np.sum(np.abs(traj.final - want)))
        ok &= tv < 1e-6
        details.append(f"{make.__name__} TV {tv:.2e}")
    record(3, "equilibrium configuration", ok, ", ".join(details) + " (tol 1e-6)")


def test_criterion_4_alternation_law():
    failures = 0
    # exhaustive small cases against the explicit case list
    for n in range(9):
        old = OrderedTraitSequence(np.arange(n + 1))
        for gap in range(n + 2):
            got = {"m" if i == -1 else int(i) for i in insert_at(old, -1, gap).occupied_ids}
            failures += got != literal_next_support(n, gap)
    # long run, replayed through the case list
    path = simulate_tst(fixtures.parametric(), np.inf, seed=12345, max_jumps=10_000)
    order = list(path.initial.seq.ids())
    occupied = {order[-1]}
    states = path.iter_states()
    next(states)
    for ev, state in zip(path.events, states):
        n = len(order) - 1
        lit = literal_next_support(n, ev.rank)
        occupied = {ev.mutant_id if k == "m" else order[k] for k in lit}
        order.insert(ev.rank, ev.mutant_id)
        failures += occupied != set(int(i) for i in state.occupied_ids)
        failures += tuple(order) != state.seq.ids()
    record(4, "alternation law", failures == 0 and path.n_jumps == 10_000,
           f"{path.n_jumps} jumps replayed, {failures} mismatches")


def test_criterion_5_waiting_time_law():
    model = fixtures.parametric()
    path = simulate_tst(model, np.inf, seed=777, max_jumps=10_000)
    z = np.asarray(path.betas) * np.asarray(path.waits)
    ks = stats.kstest(z, "expon")
    # parent choice from fixed states
    worst = 0.0
    for k, state in enumerate(path.iter_states()):
        if k not in (0, 25, 400):
            continue
        occ = state.occupied_ids
        beta = jump_rate(state)
        p = state.table.xi[occ] * state.table.mu[occ] / beta
        rng = np.random.Generator(np.random.Philox(k))
        n = 100_000
        parents = np.array([sample_jump(state, model, rng)[2].parent_id for _ in range(n)])
        for pid, pk in zip(occ, p):
            se = np.sqrt(pk * (1 - pk) / n)
            if se > 0:
                worst = max(worst, abs(np.mean(parents == pid) - pk) / se)
    ok = ks.pvalue > 0.01 and worst < 3
    record(5, "waiting-time law", ok, f"KS p = {ks.pvalue:.3f} over {len(z)} jumps (alpha 0.01), "
           f"worst parent-frequency deviation {worst:.2f} SE (tol 3)")


def test_criterion_6_two_scale_crosscheck():
    model = fixtures.parametric(epsilon=1e-4, sigma=1e-2, rho=1e-3, values=((0.5,), (1.6,), (2.7,)))
    start = relaxed_start(model)
    t0 = time.perf_counter()
    results = [compare_one_step(model, start, seed) for seed in range(50)]
    wall = time.perf_counter() - t0
    support = sum(r.support_match for r in results)
    passed = sum(r.passed for r in results)
    bad = ", ".join(f"seed {r.seed} TV {r.tv:.1e}" for r in results if not r.passed)
    ok = passed >= 0.95 * len(results) and wall < 300
    record(6, "two-scale cross-validation", ok,
           f"{passed}/50 events within TV {TV_TOL:g} (need 48), support {support}/50, runtime {wall:.1f}s"
           + (f"; failing: {bad}" if bad else ""))


def test_criterion_7_stability_suite():
    rng = np.random.default_rng(2025)
    ratios = []
    unique = 0
    for _ in range(20):
        system = random_sign_condition_system(rng)
        rep = classify_equilibria(system)
        unique += [p.name for p in rep.stable] == ["y-only"]
        ratios.append(basin_check(system))
    ok = unique == 20 and min(ratios) >= 0.99
    record(7, "stability suite", ok, f"{unique}/20 unique stable (0, xi_bar(y)), min basin ratio {min(ratios):.3f}")


def test_criterion_8_structural_recursion():
    short_model, long_model = fixtures.chain_two(), fixtures.chain_four()
    short = limit_profile_for(short_model)
    long = build_limit_profile(compute_fitness(long_model), long_model, require_assumptions=False)
    lo, hi = short.I[2], short.I[2] + short.S[0]
    points = sorted(set(short.switch_times) | set(long.switch_times))
    probes = [t for p in points for t in (p, np.nextafter(p, np.inf))] + list(np.linspace(0, 2 * hi, 4001))
    mismatches = 0
    for t in probes:
        if lo <= t < hi:
            continue
        a = {k: v for k, v in short.configuration_at(t).items() if k in (0, 1, 2)}
        b = {k: v for k, v in long.configuration_at(t).items() if k in (0, 1, 2)}
        mismatches += a != b
    worst = 0.0
    for model, prof in ((short_model, short), (long_model, long)):
        f = compute_fitness(model).ordered_f()
        for k in range(prof.L):
            worst = max(worst, abs((prof.I[k + 1] - prof.I[k]) - 1 / f[k + 1, k]) / (1 / f[k + 1, k]))
    ok = mismatches == 0 and worst <= 4 * np.finfo(float).eps
    record(8, "structural recursion", ok,
           f"{mismatches} configuration mismatches outside [{lo:.4f}, {hi:.4f}), "
           f"max identity error {worst:.1e} relative")


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(model_document(fixtures.parametric(values=((0.5,), (1.6,), (2.7,)), mutation_rate=0.1))))
    runs = {
        "simulate-tst": ["--t-end", "20", "--replicas", "3"],
        "simulate-two-scale": ["--t-end", "0.5", "--replicas", "2"],
    }
    differing = []
    for command, extra in runs.items():
        digests = []
        for k in range(2):
            out = tmp_path / f"{command}_{k}"
            assert main([command, "--config", str(cfg), "--out", str(out), "--seed", "99", *extra]) == 0
            digests.append(json.loads((out / "manifest.json").read_text())["files"])
            assert digests[-1]
        if digests[0] != digests[1]:
            differing.append(command)
    record(9, "determinism", not differing,
           "byte-identical artifacts for " + ", ".join(runs) if not differing else f"differs: {differing}")
