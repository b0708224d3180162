"""Deterministic finite-trait dynamics, level crossings and the two-scale simulator."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BlowUp,
    OrderViolation,
    StepUnderflow,
    ThinningBoundExceeded,
    ValidationError,
)
from .model import (
    DemographicModel,
    TraitRecord,
    compute_fitness,
    neighbour_migration,
    sample_mutation,
)

SUPPORT_THRESHOLD = 1e-12
DEFAULT_CAP = 1e6


class MigrationMode(enum.Enum):
    BIRTH_WEIGHTED = "birth-weighted"  # flux eps * b(x_j) xi(x_j) m(x_j, x_i)
    PLAIN = "plain"  # flux eps * xi(x_j) m(x_j, x_i), only onto supported traits

    @classmethod
    def parse(cls, value) -> "MigrationMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise ValidationError(
                f"migration mode {value!r} not one of {[m.value for m in cls]}"
            ) from None


# ---------------------------------------------------------------------------
# effective system


def effective_arrays(model: DemographicModel) -> tuple[np.ndarray, np.ndarray]:
    """Competition and migration matrices actually used by the dynamics.

    Tabular inputs are taken as given (a missing migration kernel defaults to
    nearest fitness neighbours).  For parametric models both competition and
    migration are restricted to nearest neighbours in the fitness order.
    """
    n = len(model.traits)
    if model.families is None and model.m is not None:
        return np.asarray(model.alpha), np.asarray(model.m)
    order = np.asarray(compute_fitness(model).order) if n > 1 else np.zeros(1, dtype=int)
    m = np.zeros((n, n))
    m[np.ix_(order, order)] = neighbour_migration(n)
    if model.families is None:
        return np.asarray(model.alpha), m
    pos = np.empty(n, dtype=int)
    pos[order] = np.arange(n)
    near = np.abs(pos[:, None] - pos[None, :]) <= 1
    return np.where(near, model.alpha, 0.0), m


class Rhs:
    """Vector field of the finite-trait system in model (creation) indexing."""

    def __init__(self, model: DemographicModel, mode: MigrationMode, support_threshold: float = SUPPORT_THRESHOLD):
        self.alpha, self.m = effective_arrays(model)
        self.r = np.asarray(model.r, dtype=float)
        self.eps = float(model.epsilon)
        self.weight = np.asarray(model.b, dtype=float) if mode is MigrationMode.BIRTH_WEIGHTED else None
        self.plain = mode is MigrationMode.PLAIN
        self.threshold = support_threshold
        self.m_out = self.m.sum(axis=1)

    def growth_rates(self, y: np.ndarray) -> np.ndarray:
        return self.r - self.alpha @ y

    def __call__(self, y: np.ndarray) -> np.ndarray:
        dy = (self.r - self.alpha @ y) * y
        if self.eps == 0.0:
            return dy
        emit = y if self.weight is None else self.weight * y
        if self.plain:
            m = self.m * (y > self.threshold)[None, :]
            return dy + self.eps * (emit @ m - emit * m.sum(axis=1))
        return dy + self.eps * (emit @ self.m - emit * self.m_out)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dopri(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    tol: float,
    atol: float | None = None,
    max_step: float = np.inf,
    cap: float = DEFAULT_CAP,
    stop: Callable[[float, np.ndarray, np.ndarray], bool] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive embedded RK 5(4) on an autonomous system; returns every accepted step.

    Error control is mixed: ``|err_i| <= atol + tol * |y_i|`` with ``atol``
    defaulting to ``1e-6 * tol`` so that exponentially small densities are
    still resolved in relative terms.  States are floored at 0 after each
    accepted step.
    """
    atol = 1e-6 * tol if atol is None else atol
    y = np.array(y0, dtype=float)
    t = float(t0)
    ts = [t]
    ys = [y.copy()]
    k1 = rhs(y)
    h = min(max_step, t1 - t0, 0.01 * max(1.0, abs(t1 - t0)))
    floor = 1e-12 * max(1.0, abs(t1))
    ks = np.empty((7, len(y)))
    while t < t1:
        h = min(h, t1 - t)
        if h < floor and t + h < t1:
            raise StepUnderflow(f"step size {h:.3g} collapsed at t = {t:.6g}")
        ks[0] = k1
        for s in range(1, 7):
            ks[s] = rhs(y + h * (np.dot(_A[s], ks[:s])))
        y_new = y + h * (_B5 @ ks)
        err_vec = h * (_E @ ks)
        scale = atol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if len(y) else 0.0
        if not np.isfinite(err):
            raise BlowUp(f"non-finite state at t = {t:.6g}")
        if err <= 1.0:
            t = t1 if t1 - (t + h) <= 1e-14 * max(1.0, abs(t1)) else t + h
            y = np.maximum(y_new, 0.0)
            if np.any(y > cap):
                raise BlowUp(f"density exceeded cap {cap:g} at t = {t:.6g}")
            k1 = ks[6] if np.all(y_new >= 0) else rhs(y)
            ts.append(t)
            ys.append(y.copy())
            if stop is not None and stop(t, y, k1):
                break
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h = min(h * fac, max_step)
    return np.asarray(ts), np.vstack(ys)


def default_max_step(model: DemographicModel) -> float:
    """0.1 over the fastest rate: max |f| on competing pairs, or max (b - d)."""
    alpha, _ = effective_arrays(model)
    r = model.r
    f = r[:, None] - alpha * (r / np.diag(model.alpha))[None, :]
    return 0.1 / max(float(np.max(np.abs(f))), float(np.max(r)))


# ---------------------------------------------------------------------------
# trajectories and crossings


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    trait: int
    kind: str  # "UpCross" or "DownCross"
    level: float


@dataclass(frozen=True)
class MutationEvent:
    time: float  # mutation time units (sigma * ODE time)
    parent_id: int
    new_id: int
    value: tuple[float, ...]
    rank: int


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), len(trait_ids)); traits not yet born carry 0
    trait_ids: tuple[int, ...]
    events: list[CrossingEvent] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def column(self, trait_id: int) -> np.ndarray:
        return self.states[:, self.trait_ids.index(trait_id)]

    def final_configuration(self) -> dict[int, float]:
        return {tid: float(v) for tid, v in zip(self.trait_ids, self.final)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"trait_{i}" for i in self.trait_ids])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def write_events_csv(events: list[CrossingEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "trait", "kind", "level"])
        for e in events:
            w.writerow([repr(e.time), e.trait, e.kind, repr(e.level)])


def write_mutations_jsonl(events: list[MutationEvent], path) -> None:
    with open(path, "w") as fh:
        for e in events:
            row = {"time": e.time, "parent_id": e.parent_id, "new_id": e.new_id, "value": list(e.value), "rank": e.rank}
            fh.write(json.dumps(row) + "\n")


def detect_crossings(traj: Trajectory, eta: float) -> list[CrossingEvent]:
    """Level-``eta`` crossings of every trait, linearly interpolated between saved steps."""
    if eta <= 0:
        raise ValidationError("crossing level eta must be > 0")
    t = traj.times
    out = []
    above = traj.states >= eta
    for col, tid in enumerate(traj.trait_ids):
        x = traj.states[:, col]
        flips = np.flatnonzero(above[1:, col] != above[:-1, col])
        for k in flips:
            x0, x1 = x[k], x[k + 1]
            tc = t[k] + (eta - x0) * (t[k + 1] - t[k]) / (x1 - x0)
            out.append(CrossingEvent(float(tc), tid, "UpCross" if x1 > x0 else "DownCross", eta))
    out.sort(key=lambda e: (e.time, e.trait))
    return out


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True, eq=False)
class OdeSystemSpec:
    model: DemographicModel
    migration_mode: MigrationMode = MigrationMode.BIRTH_WEIGHTED
    initial_state: np.ndarray | None = None
    support_threshold: float = SUPPORT_THRESHOLD
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        object.__setattr__(self, "migration_mode", MigrationMode.parse(self.migration_mode))
        y0 = self.initial_state
        if y0 is None:
            y0 = monomorphic_initial_state(self.model)
        y0 = np.array(y0, dtype=float)
        if y0.shape != (len(self.model.traits),):
            raise ValidationError(f"initial_state: expected {len(self.model.traits)} densities")
        if np.any(y0 < 0) or not np.any(y0 > 0):
            raise ValidationError("initial_state: densities must be >= 0 with at least one positive")
        y0.setflags(write=False)
        object.__setattr__(self, "initial_state", y0)


def monomorphic_initial_state(model: DemographicModel) -> np.ndarray:
    """xi_bar at the least fit trait, zero elsewhere."""
    y0 = np.zeros(len(model.traits))
    low = compute_fitness(model).order[0] if len(model.traits) > 1 else 0
    y0[low] = model.xi_bar[low]
    return y0


def integrate(
    spec: OdeSystemSpec,
    t_end: float,
    tol: float = 1e-8,
    eta: float | None = None,
    max_step: float | None = None,
    atol: float | None = None,
) -> Trajectory:
    if t_end <= 0 or tol <= 0:
        raise ValidationError("integrate needs t_end > 0 and tol > 0")
    rhs = Rhs(spec.model, spec.migration_mode, spec.support_threshold)
    h_max = default_max_step(spec.model) if max_step is None else max_step
    ts, ys = dopri(rhs, spec.initial_state, 0.0, t_end, tol, atol=atol, max_step=h_max, cap=spec.cap)
    traj = Trajectory(ts, ys, spec.model.ids)
    if eta is not None:
        traj.events = detect_crossings(traj, eta)
    return traj


def relax(
    model: DemographicModel,
    y0,
    mode: MigrationMode = MigrationMode.PLAIN,
    tol: float = 1e-10,
    t_max: float = 1e5,
    stationary: float = 1e-13,
) -> np.ndarray:
    """Integrate until the vector field is below ``stationary`` (or ``t_max``); return the state."""
    rhs = Rhs(model, MigrationMode.parse(mode))

    def done(t, y, dy):
        return float(np.max(np.abs(dy))) < stationary

    _, ys = dopri(rhs, y0, 0.0, t_max, tol, max_step=default_max_step(model) * 10, stop=done)
    return ys[-1]


# ---------------------------------------------------------------------------
# two-scale simulation


def new_trait(model: DemographicModel, parent_id: int, value, event_index: int) -> TraitRecord:
    return TraitRecord(max(model.ids) + 1, tuple(value), parent_id, event_index)


def place_mutant(model, parent_idx, rng, on_ambiguous: str, event_index: int, max_resample: int = 100):
    """Draw a mutant of trait ``parent_idx``; returns (extended model, record, rank in fitness order)."""
    parent = model.traits[parent_idx]
    for _ in range(max_resample):
        h = sample_mutation(model, parent.value, rng)
        rec = new_trait(model, parent.id, np.asarray(parent.value) + h, event_index)
        grown = model.with_trait(rec)
        try:
            report = compute_fitness(grown)
        except OrderViolation:
            if on_ambiguous == "raise":
                raise
            continue
        return grown, rec, report.order.index(len(grown.traits) - 1)
    raise OrderViolation(f"no rankable mutant of trait {parent.id} after {max_resample} draws")


def simulate_two_scale(
    model: DemographicModel,
    t_end_mutation_units: float,
    seed: int,
    initial_state=None,
    mode: MigrationMode = MigrationMode.PLAIN,
    tol: float = 1e-8,
    max_events: int | None = None,
    on_ambiguous: str = "resample",
    stop_after_events: int | None = None,
) -> tuple[Trajectory, list[MutationEvent], DemographicModel]:
    """Drift plus migration between mutations; mutations by Poisson thinning of sigma * sum xi mu.

    Returns the trajectory (ODE time), the mutation events (mutation time,
    i.e. sigma times ODE time) and the final grown model.
    """
    if model.sigma <= 0 or model.rho <= 0:
        raise ValidationError("two-scale simulation needs sigma > 0 and rho > 0")
    if model.families is None and np.any(model.mu > 0):
        raise ValidationError("two-scale simulation with mutation needs a parametric model")
    mode = MigrationMode.parse(mode)
    rng = np.random.Generator(np.random.Philox(seed))
    y = monomorphic_initial_state(model) if initial_state is None else np.array(initial_state, dtype=float)
    t_end = t_end_mutation_units / model.sigma
    t = 0.0
    times: list[np.ndarray] = [np.zeros(1)]
    blocks: list[np.ndarray] = [y[None, :].copy()]
    events: list[MutationEvent] = []
    rhs = Rhs(model, mode)
    h_max = default_max_step(model)
    while t < t_end:
        mu_max = float(np.max(model.mu))
        lam = model.sigma * mu_max * 1.5 * float(np.sum(np.maximum(y, model.xi_bar)))
        t_next = t_end if lam == 0 else min(t_end, t + rng.exponential(1.0 / lam))
        ts, ys = dopri(rhs, y, t, t_next, tol, max_step=h_max)
        times.append(ts[1:])
        blocks.append(ys[1:])
        t, y = float(ts[-1]), ys[-1].copy()
        if t >= t_end:
            break
        rates = model.sigma * y * model.mu
        total = float(rates.sum())
        if total > lam:
            raise ThinningBoundExceeded(f"mutation rate {total:.6g} above majorant {lam:.6g} at t = {t:.6g}")
        if rng.random() * lam >= total:
            continue
        parent_idx = int(rng.choice(len(y), p=rates / total))
        model, rec, rank = place_mutant(model, parent_idx, rng, on_ambiguous, len(events) + 1)
        y = np.append(y, model.rho)
        blocks = [np.hstack([b, np.zeros((len(b), 1))]) for b in blocks]
        for b in reversed(blocks):
            if len(b):
                b[-1] = y
                break
        events.append(MutationEvent(t * model.sigma, rec.parent_id, rec.id, rec.value, rank))
        rhs = Rhs(model, mode)
        h_max = default_max_step(model)
        if max_events is not None and len(events) > max_events:
            raise ValidationError(f"more than {max_events} mutation events")
        if stop_after_events is not None and len(events) >= stop_after_events:
            break
    traj = Trajectory(np.concatenate(times), np.vstack(blocks), model.ids)
    return traj, events, model
