"""Piecewise-constant limit profile on the ln(1/eps) clock and convergence of the ODE toward it."""

from __future__ import annotations

import bisect
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import AssumptionViolation, UnresolvedEvent, ValidationError
from .model import (
    DemographicModel,
    FitnessReport,
    check_assumptions,
    compute_fitness,
    switch_constants,
)
from .ode import MigrationMode, OdeSystemSpec, detect_crossings, integrate


@dataclass(frozen=True)
class PredictedEvent:
    trait: int
    label: str  # "invade k" or "recover q"
    time: float  # rescaled clock


@dataclass(frozen=True, eq=False)
class LimitProfile:
    ordered_ids: tuple[int, ...]
    switch_times: tuple[float, ...]  # interval k is [switch_times[k], switch_times[k + 1])
    configurations: tuple[dict, ...]
    I: np.ndarray
    S: np.ndarray
    events: tuple[PredictedEvent, ...]

    @property
    def L(self) -> int:
        return len(self.ordered_ids) - 1

    def configuration_at(self, t: float) -> dict:
        if t < 0:
            raise ValueError("rescaled time must be >= 0")
        return self.configurations[bisect.bisect_right(self.switch_times, t) - 1]

    @property
    def final(self) -> dict:
        return self.configurations[-1]

    def intervals(self) -> list[dict]:
        ends = list(self.switch_times[1:]) + [None]
        return [
            {"start": s, "end": e, "configuration": {str(k): v for k, v in c.items()}}
            for s, e, c in zip(self.switch_times, ends, self.configurations)
        ]

    def to_json(self) -> str:
        doc = {
            "ordered_ids": list(self.ordered_ids),
            "I": self.I.tolist(),
            "S": self.S.tolist(),
            "intervals": self.intervals(),
        }
        return json.dumps(doc, indent=2)


def build_limit_profile(
    report: FitnessReport, model: DemographicModel, require_assumptions: bool = True
) -> LimitProfile:
    """Monomorphic substitutions x0 -> x1 -> ... -> xL, then recoveries every second trait down.

    Trait x_q (q = L-2, L-4, ...) returns at I_{q+2} + S_q.  With
    ``require_assumptions=False`` the formal profile is still built as long
    as those return times come out strictly ordered.
    """
    if require_assumptions:
        checks = check_assumptions(model)
        if not checks.conditions_hold:
            bad = [f"{c.name}: {'; '.join(c.violations)}" for c in checks.checks if not c.passed]
            raise AssumptionViolation("limit profile hypotheses fail: " + " | ".join(bad))
    order = np.asarray(report.order)
    ids = report.ordered_ids
    xi = report.ordered_xi()
    L = len(ids) - 1
    I, S = switch_constants(report.ordered_f(), model.r[order])

    times = [0.0] + [float(I[k]) for k in range(1, L + 1)]
    configs = [{ids[k]: float(xi[k])} for k in range(L + 1)]
    events = [PredictedEvent(ids[k], f"invade {k}", float(I[k])) for k in range(1, L + 1)]
    support = {ids[L]: float(xi[L])}
    last = float(I[L])
    for q in range(L - 2, -1, -2):
        t_q = float(I[q + 2] + S[q])
        if not t_q > last:
            raise AssumptionViolation(
                f"return of x_{q} at {t_q:.6g} does not follow the previous switch at {last:.6g}"
            )
        support = {ids[q]: float(xi[q]), **support}
        times.append(t_q)
        configs.append(dict(sorted(support.items(), key=lambda kv: ids.index(kv[0]))))
        events.append(PredictedEvent(ids[q], f"recover {q}", t_q))
        last = t_q
    return LimitProfile(tuple(ids), tuple(times), tuple(configs), I, S, tuple(events))


def final_support_indices(L: int) -> list[int]:
    return list(range(L % 2, L + 1, 2))


# ---------------------------------------------------------------------------
# convergence


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    trait: int
    label: str
    predicted: float
    measured: float  # crossing time / ln(1/eps)
    rel_error: float


@dataclass(frozen=True)
class SlopeRow:
    """Offset-free estimate: change in crossing time per unit of ln(1/eps) between two sweep members."""

    eps_a: float
    eps_b: float
    label: str
    predicted: float
    slope: float
    rel_error: float


@dataclass
class ConvergenceReport:
    eta: float
    rows: list[ConvergenceRow]
    slopes: list[SlopeRow] = field(default_factory=list)

    @property
    def epsilons(self) -> list[float]:
        return sorted({r.epsilon for r in self.rows}, reverse=True)

    def error(self, label: str, epsilon: float) -> float:
        for r in self.rows:
            if r.label == label and r.epsilon == epsilon:
                return r.rel_error
        raise KeyError((label, epsilon))

    @property
    def monotone(self) -> dict[str, bool] | None:
        """Per event: |relative error| strictly decreasing as eps decreases (None for a single eps)."""
        eps = self.epsilons
        if len(eps) < 2:
            return None
        out = {}
        for label in dict.fromkeys(r.label for r in self.rows):
            errs = [abs(self.error(label, e)) for e in eps]
            out[label] = all(b < a for a, b in zip(errs, errs[1:]))
        return out

    @property
    def monotone_decreasing(self) -> bool | None:
        m = self.monotone
        return None if m is None else all(m.values())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "eta", "trait", "event", "predicted", "measured", "rel_error"])
            for r in self.rows:
                w.writerow([repr(r.epsilon), repr(self.eta), r.trait, r.label, repr(r.predicted),
                            repr(r.measured), repr(r.rel_error)])

    def slopes_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps_a", "eps_b", "event", "predicted", "slope", "rel_error"])
            for s in self.slopes:
                w.writerow([repr(s.eps_a), repr(s.eps_b), s.label, repr(s.predicted), repr(s.slope),
                            repr(s.rel_error)])


def match_events(predicted: list[PredictedEvent], crossings, scale: float) -> dict[str, float]:
    """Pair every predicted up-crossing with a distinct measured one of the same trait.

    Returns label -> measured time on the rescaled clock.  Pairing minimises
    total distance per trait, so clustered events cannot be claimed twice.
    """
    out = {}
    for trait in dict.fromkeys(p.trait for p in predicted):
        preds = [p for p in predicted if p.trait == trait]
        meas = np.array([c.time / scale for c in crossings if c.trait == trait and c.kind == "UpCross"])
        if len(meas) < len(preds):
            missing = ", ".join(p.label for p in preds)
            raise UnresolvedEvent(
                f"trait {trait}: expected up-crossings ({missing}) but found {len(meas)}"
            )
        cost = np.abs(np.array([p.time for p in preds])[:, None] - meas[None, :])
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            out[preds[i].label] = float(meas[j])
    return out


def _run_one(args):
    model, eps, t_end, eta, tol, mode = args
    spec = OdeSystemSpec(model.with_scales(epsilon=eps), mode)
    traj = integrate(spec, t_end, tol)
    return detect_crossings(traj, eta)


def verify_convergence(
    model: DemographicModel,
    profile: LimitProfile,
    eps_sweep,
    eta: float | None = None,
    tol: float = 1e-9,
    mode: MigrationMode = MigrationMode.BIRTH_WEIGHTED,
    horizon: float = 1.5,
    workers: int = 1,
) -> ConvergenceReport:
    """Integrate from the monomorphic ancestor for each eps and compare rescaled crossing times."""
    xi_min = float(np.min(model.xi_bar))
    eta = 0.05 * xi_min if eta is None else float(eta)
    if not 0 < eta < xi_min / 2:
        raise ValidationError(f"eta must lie in (0, {xi_min / 2:.6g})")
    eps_sweep = [float(e) for e in eps_sweep]
    if not eps_sweep or any(not 0 < e < 1 for e in eps_sweep):
        raise ValidationError("eps sweep must be a non-empty list of values in (0, 1)")
    last = max(profile.switch_times[-1], 1.0)
    jobs = [(model, e, horizon * last * np.log(1 / e), eta, tol, MigrationMode.parse(mode)) for e in eps_sweep]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    rows = []
    for e, crossings in zip(eps_sweep, results):
        scale = np.log(1 / e)
        measured = match_events(list(profile.events), crossings, scale)
        for p in profile.events:
            m = measured[p.label]
            rows.append(ConvergenceRow(e, p.trait, p.label, p.time, m, (m - p.time) / p.time))
    report = ConvergenceReport(eta, rows)
    eps_sorted = report.epsilons
    for a, b in zip(eps_sorted, eps_sorted[1:]):
        da, db = np.log(1 / a), np.log(1 / b)
        for p in profile.events:
            ta = next(r.measured for r in rows if r.epsilon == a and r.label == p.label) * da
            tb = next(r.measured for r in rows if r.epsilon == b and r.label == p.label) * db
            slope = (tb - ta) / (db - da)
            report.slopes.append(SlopeRow(a, b, p.label, p.time, slope, (slope - p.time) / p.time))
    return report


def limit_profile_for(model: DemographicModel, require_assumptions: bool = True) -> LimitProfile:
    return build_limit_profile(compute_fitness(model), model, require_assumptions)
