"""Trait substitution tree: the jump chain on the mutation time scale and its genealogy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import AmbiguousRank, ValidationError
from .model import (
    FITNESS_TOL,
    DemographicModel,
    OrderedTraitSequence,
    compute_fitness,
    insert_at,
    rank_mutant,
    sample_mutation,
)


class TraitTable:
    """Append-only per-trait arrays indexed by trait id.

    States refer to a prefix of the table.  Appending from a state whose
    prefix is shorter than the table copies the prefix first, so branches
    never overwrite each other.
    """

    def __init__(self, values, r, xi, mu, parent, birth_event, birth_time):
        self._values = np.array(values, dtype=float).reshape(len(r), -1)
        self._r = np.array(r, dtype=float)
        self._xi = np.array(xi, dtype=float)
        self._mu = np.array(mu, dtype=float)
        self._parent = np.array(parent, dtype=np.int64)
        self._birth = np.array(birth_event, dtype=np.int64)
        self._time = np.array(birth_time, dtype=float)
        self.size = len(self._r)

    @classmethod
    def from_model(cls, model: DemographicModel) -> "TraitTable":
        ids = model.ids
        if ids != tuple(range(len(ids))):
            raise ValidationError("trait ids of the initial model must be 0..n-1")
        parent = [-1 if t.parent_id is None else t.parent_id for t in model.traits]
        return cls(
            model.values, model.r, model.xi_bar, model.mu, parent,
            [t.birth_event for t in model.traits], np.zeros(len(ids)),
        )

    def _view(self, name: str) -> np.ndarray:
        return getattr(self, "_" + name)[: self.size]

    values = property(lambda self: self._view("values"))
    r = property(lambda self: self._view("r"))
    xi = property(lambda self: self._view("xi"))
    mu = property(lambda self: self._view("mu"))
    parent = property(lambda self: self._view("parent"))
    birth_event = property(lambda self: self._view("birth"))
    birth_time = property(lambda self: self._view("time"))

    def branch(self, size: int) -> "TraitTable":
        t = TraitTable.__new__(TraitTable)
        for name in ("values", "r", "xi", "mu", "parent", "birth", "time"):
            setattr(t, "_" + name, getattr(self, "_" + name)[:size].copy())
        t.size = size
        return t

    def append(self, value, r, xi, mu, parent, birth_event, birth_time) -> int:
        if self.size == len(self._r):
            grow = max(16, self.size)
            self._values = np.vstack([self._values, np.zeros((grow, self._values.shape[1]))])
            for name in ("r", "xi", "mu", "time"):
                arr = getattr(self, "_" + name)
                setattr(self, "_" + name, np.concatenate([arr, np.zeros(grow)]))
            for name in ("parent", "birth"):
                arr = getattr(self, "_" + name)
                setattr(self, "_" + name, np.concatenate([arr, np.zeros(grow, dtype=np.int64)]))
        i = self.size
        self._values[i] = value
        self._r[i], self._xi[i], self._mu[i] = r, xi, mu
        self._parent[i], self._birth[i], self._time[i] = parent, birth_event, birth_time
        self.size += 1
        return i


@dataclass(frozen=True, eq=False)
class TstState:
    seq: OrderedTraitSequence
    table: TraitTable
    n_traits: int
    clock: float = 0.0

    @classmethod
    def initial(cls, model: DemographicModel) -> "TstState":
        table = TraitTable.from_model(model)
        order = compute_fitness(model).order if len(model.traits) > 1 else (0,)
        return cls(OrderedTraitSequence(np.asarray(order)), table, table.size, 0.0)

    @property
    def occupied_ids(self) -> np.ndarray:
        return self.seq.occupied_ids

    @property
    def masses(self) -> dict[int, float]:
        """xi_bar on occupied traits, 0 on virtual ones, in fitness order."""
        out = dict.fromkeys(self.seq.ids(), 0.0)
        for i in self.occupied_ids:
            out[int(i)] = float(self.table._xi[i])
        return out


@dataclass(frozen=True)
class JumpEvent:
    parent_id: int
    mutant_id: int
    h: tuple[float, ...]
    rank: int
    tag: str  # "establish" or "shadow"


def jump_rate(state: TstState, model: DemographicModel | None = None) -> float:
    occ = state.occupied_ids
    return float(np.sum(state.table._xi[occ] * state.table._mu[occ]))


def _mutant_rates(model: DemographicModel, value: np.ndarray) -> tuple[float, float, float, float]:
    fam = model.families
    v = value[None, :]
    b, d = float(fam.birth(v)[0]), float(fam.death(v)[0])
    a = float(fam.competition.scale(v)[0])
    if b <= 0 or d <= 0 or b - d <= 0:
        raise ValidationError(f"mutant at {tuple(value)} violates b > 0, d > 0, b - d > 0")
    return b - d, (b - d) / a, float(fam.mutation_rate(v)[0]), a


def rank_against(state: TstState, model: DemographicModel, value: np.ndarray, r_new: float, xi_new: float,
                 a_new: float, tol: float = FITNESS_TOL) -> int:
    """Rank of a prospective trait within ``state.seq`` by pairwise invasion fitness."""
    ids = state.seq.ordered_ids
    tab = state.table
    comp = model.families.competition
    vals = tab._values[ids]
    dist = np.linalg.norm(vals - value[None, :], axis=1)
    k = comp.k(dist)
    a_old = tab._r[ids] / tab._xi[ids]
    f_mut_vs = r_new - a_new * k * tab._xi[ids]
    f_vs_mut = tab._r[ids] - a_old * k * xi_new
    return rank_mutant(f_mut_vs, f_vs_mut, tol)


def sample_jump(
    state: TstState,
    model: DemographicModel,
    rng: np.random.Generator,
    on_ambiguous: str = "resample",
    wait: float | None = None,
    max_resample: int = 1000,
) -> tuple[float, TstState, JumpEvent]:
    """One transition: exponential wait, parent by xi_bar * mu, mutant placed by rank."""
    if model.families is None:
        raise ValidationError("the jump chain needs parametric rate families to evaluate new traits")
    beta = jump_rate(state)
    if beta <= 0:
        raise ValidationError("jump rate is zero: the state is absorbing")
    if wait is None:
        wait = float(rng.exponential(1.0 / beta))
    occ = state.occupied_ids
    w = state.table._xi[occ] * state.table._mu[occ]
    parent = int(occ[rng.choice(len(occ), p=w / beta)])
    x = state.table._values[parent]
    for _ in range(max_resample):
        h = sample_mutation(model, x, rng)
        y = x + h
        r_new, xi_new, mu_new, a_new = _mutant_rates(model, y)
        try:
            rank = rank_against(state, model, y, r_new, xi_new, a_new)
        except AmbiguousRank:
            if on_ambiguous == "raise":
                raise
            continue
        break
    else:
        raise AmbiguousRank(f"no rankable mutant of trait {parent} after {max_resample} draws")
    table = state.table if state.table.size == state.n_traits else state.table.branch(state.n_traits)
    clock = state.clock + wait
    event_index = int(table._birth[: state.n_traits].max()) + 1
    new_id = table.append(y, r_new, xi_new, mu_new, parent, event_index, clock)
    seq = insert_at(state.seq, new_id, rank)
    tag = "establish" if seq.is_occupied(rank) else "shadow"
    nxt = TstState(seq, table, table.size, clock)
    return wait, nxt, JumpEvent(parent, new_id, tuple(float(v) for v in h), rank, tag)


@dataclass(eq=False)
class TstPath:
    initial: TstState
    events: list[JumpEvent] = field(default_factory=list)
    waits: list[float] = field(default_factory=list)
    betas: list[float] = field(default_factory=list)
    seed: int | None = None
    t_end: float = 0.0
    stopped: str = "t_end"  # "t_end", "absorbing" or "max_jumps"

    @property
    def table(self) -> TraitTable:
        return self.initial.table

    @property
    def n_jumps(self) -> int:
        return len(self.events)

    def iter_states(self) -> Iterator[TstState]:
        """Initial state, then the state after each jump (rebuilt on demand)."""
        s = self.initial
        yield s
        ids = s.seq.ordered_ids
        clock = s.clock
        for ev, w in zip(self.events, self.waits):
            ids = np.insert(ids, ev.rank, ev.mutant_id)
            clock += w
            s = TstState(OrderedTraitSequence(ids), self.table, ev.mutant_id + 1, clock)
            yield s

    @property
    def final(self) -> TstState:
        for s in self.iter_states():
            pass
        return s


def simulate_tst(
    model: DemographicModel,
    t_end: float,
    seed: int,
    on_ambiguous: str = "resample",
    max_jumps: int | None = None,
) -> TstPath:
    """Run the jump chain until the clock would pass ``t_end`` or the rate vanishes."""
    if model.families is None:
        raise ValidationError("simulate-tst needs a parametric model (tabular traits cannot mutate)")
    if t_end < 0:
        raise ValidationError("t_end must be >= 0")
    rng = np.random.Generator(np.random.Philox(seed))
    state = TstState.initial(model)
    path = TstPath(state, seed=seed, t_end=t_end)
    while True:
        if max_jumps is not None and path.n_jumps >= max_jumps:
            path.stopped = "max_jumps"
            break
        beta = jump_rate(state)
        if beta <= 0:
            path.stopped = "absorbing"
            break
        wait = float(rng.exponential(1.0 / beta))
        if state.clock + wait > t_end:
            break
        _, state, ev = sample_jump(state, model, rng, on_ambiguous, wait=wait)
        path.events.append(ev)
        path.waits.append(wait)
        path.betas.append(beta)
    return path


# ---------------------------------------------------------------------------
# export


def _fmt(x: float) -> str:
    return repr(float(x))


def occupancy_intervals(path: TstPath) -> dict[int, list[list[float | None]]]:
    """Per trait: list of [start, end) clock intervals during which it is occupied (end None = open)."""
    spans: dict[int, list[list[float | None]]] = {}
    current: set[int] = set()
    for s in path.iter_states():
        occ = set(int(i) for i in s.occupied_ids)
        for i in sorted(current - occ):
            spans[i][-1][1] = s.clock
        for i in sorted(occ - current):
            spans.setdefault(i, []).append([s.clock, None])
        current = occ
    return spans


def export_tree(path: TstPath) -> tuple[str, dict]:
    """Newick string and JSON adjacency document for the genealogy.

    Newick convention: node labels ``x<id>``; the branch above a child is
    the clock time between its parent's birth and its own; roots carry no
    branch length.
    """
    tab = path.table
    n = path.initial.n_traits + path.n_jumps
    parent = tab._parent[:n]
    times = tab._time[:n]
    children: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n):
        if parent[i] >= 0:
            children[int(parent[i])].append(i)

    def newick(i: int) -> str:
        kids = children[i]
        inner = "(" + ",".join(f"{newick(c)}:{_fmt(times[c] - times[i])}" for c in kids) + ")" if kids else ""
        return f"{inner}x{i}"

    roots = [i for i in range(n) if parent[i] < 0]
    tree = newick(roots[0]) if len(roots) == 1 else "(" + ",".join(newick(r) for r in roots) + ")"
    spans = occupancy_intervals(path)
    nodes = [
        {
            "id": i,
            "parent": None if parent[i] < 0 else int(parent[i]),
            "birth_time": float(times[i]),
            "birth_event": int(tab._birth[i]),
            "value": [float(v) for v in tab._values[i]],
            "xi_bar": float(tab._xi[i]),
            "children": children[i],
            "occupied": spans.get(i, []),
        }
        for i in range(n)
    ]
    return tree + ";", {"seed": path.seed, "t_end": path.t_end, "stopped": path.stopped, "nodes": nodes}


def path_jsonl(path: TstPath) -> str:
    lines = []
    clock = path.initial.clock
    for k, (ev, w, b) in enumerate(zip(path.events, path.waits, path.betas), start=1):
        clock += w
        row = {
            "jump": k,
            "seed": path.seed,
            "time": clock,
            "wait": w,
            "beta": b,
            "parent_id": ev.parent_id,
            "mutant_id": ev.mutant_id,
            "h": list(ev.h),
            "value": [float(v) for v in path.table._values[ev.mutant_id]],
            "rank": ev.rank,
            "tag": ev.tag,
        }
        lines.append(json.dumps(row))
    return "".join(line + "\n" for line in lines)
