"""Traits, demographic rates, invasion fitness and the fitness order.

A model is either *tabular* (finite trait set, rates and competition given as
arrays) or *parametric* (rates are named families evaluated at trait values, so
new mutant traits can be appended).  Both expose the same per-trait arrays over
the current trait set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AmbiguousRank, OrderViolation, ValidationError

FITNESS_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TraitRecord:
    id: int
    value: tuple[float, ...]
    parent_id: int | None = None
    birth_event: int = 0

    def __post_init__(self):
        object.__setattr__(self, "value", tuple(float(v) for v in np.atleast_1d(self.value)))
        if (self.parent_id is None) != (self.birth_event == 0):
            raise ValidationError(
                f"trait {self.id}: parent_id must be absent exactly when birth_event == 0"
            )


# ---------------------------------------------------------------------------
# parametric families


@dataclass(frozen=True)
class RateFamily:
    """``const + <linear, x> + <quadratic, x**2>`` evaluated on the last axis of ``x``."""

    const: float
    linear: tuple[float, ...] = ()
    quadratic: tuple[float, ...] = ()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], float(self.const))
        if self.linear:
            out = out + x @ np.asarray(self.linear, dtype=float)
        if self.quadratic:
            out = out + (x * x) @ np.asarray(self.quadratic, dtype=float)
        return out


KERNELS = ("constant", "gaussian")


@dataclass(frozen=True)
class CompetitionFamily:
    """alpha(x, y) = a(x) * k(|x - y|) with k(0) = 1."""

    scale: RateFamily
    kernel: str = "constant"
    width: float = 1.0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValidationError(f"unknown competition kernel {self.kernel!r}; expected one of {KERNELS}")
        if self.width <= 0:
            raise ValidationError("competition kernel width must be > 0")

    def k(self, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        if self.kernel == "constant":
            return np.ones_like(dist)
        return np.exp(-0.5 * (dist / self.width) ** 2)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.scale(x) * self.k(np.linalg.norm(x - y, axis=-1))

    def matrix(self, values: np.ndarray) -> np.ndarray:
        return self(values[:, None, :], values[None, :, :])


@dataclass(frozen=True)
class TraitFamilies:
    birth: RateFamily
    death: RateFamily
    competition: CompetitionFamily
    mutation_rate: RateFamily
    mutation_sd: float = 0.1

    def __post_init__(self):
        if self.mutation_sd <= 0:
            raise ValidationError("mutation kernel standard deviation must be > 0")

    def rates(self, values: np.ndarray) -> dict[str, np.ndarray]:
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return {
            "b": self.birth(values),
            "d": self.death(values),
            "a": self.competition.scale(values),
            "mu": self.mutation_rate(values),
        }


# ---------------------------------------------------------------------------
# the model


@dataclass(frozen=True, eq=False)
class DemographicModel:
    traits: tuple[TraitRecord, ...]
    b: np.ndarray
    d: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    m: np.ndarray | None = None
    families: TraitFamilies | None = None
    epsilon: float = 0.0
    sigma: float = 1.0
    rho: float = 1e-3
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.traits)
        if n == 0:
            raise ValidationError("traits: at least one trait is required")
        object.__setattr__(self, "traits", tuple(self.traits))
        for name in ("b", "d", "mu"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (n,):
                raise ValidationError(f"{name}: expected {n} entries, got shape {arr.shape}")
            object.__setattr__(self, name, arr)
        alpha = _frozen(self.alpha)
        if alpha.shape != (n, n):
            raise ValidationError(f"alpha: expected a {n}x{n} matrix, got shape {alpha.shape}")
        object.__setattr__(self, "alpha", alpha)
        if self.m is not None:
            m = _frozen(self.m)
            if m.shape != (n, n):
                raise ValidationError(f"m: expected a {n}x{n} matrix, got shape {m.shape}")
            object.__setattr__(self, "m", m)
        ids = [t.id for t in self.traits]
        if len(set(ids)) != n:
            raise ValidationError("traits: ids must be unique")
        object.__setattr__(self, "_index", {tid: i for i, tid in enumerate(ids)})
        self._validate()

    def _validate(self):
        for i, t in enumerate(self.traits):
            if self.b[i] <= 0 or self.d[i] <= 0:
                raise ValidationError(f"trait {t.id}: (A1) b(x) > 0 and d(x) > 0 violated")
            if self.b[i] - self.d[i] <= 0:
                raise ValidationError(f"trait {t.id}: (A2) b(x) - d(x) > 0 violated")
            if self.alpha[i, i] <= 0:
                raise ValidationError(f"trait {t.id}: alpha(x, x) > 0 violated")
            if self.mu[i] < 0:
                raise ValidationError(f"trait {t.id}: mutation rate must be >= 0")
        if np.any(self.alpha < 0):
            raise ValidationError("alpha: competition rates must be >= 0")
        if self.m is not None:
            if np.any(self.m < 0) or np.any(np.diag(self.m) != 0):
                raise ValidationError("m: migration rates must be >= 0 with a zero diagonal")
            rows = self.m.sum(axis=1)
            if len(self.traits) > 1 and not np.allclose(rows, 1.0, atol=1e-12):
                raise ValidationError("m: each migration row must sum to 1")
        if self.epsilon < 0 or self.sigma < 0 or self.rho < 0:
            raise ValidationError("scales: epsilon, sigma and rho must be >= 0")
        if (self.lower is None) != (self.upper is None):
            raise ValidationError("space: lower and upper bounds must be given together")
        if self.lower is not None:
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if np.any(lo > hi):
                raise ValidationError("space: lower bound exceeds upper bound")
            for t in self.traits:
                v = np.asarray(t.value)
                if v.shape != lo.shape or np.any(v < lo) or np.any(v > hi):
                    raise ValidationError(f"trait {t.id}: value {t.value} outside the trait space box")

    # -- constructors -------------------------------------------------------

    @classmethod
    def tabular(cls, b, d, alpha, mu=None, m=None, values=None, **scales) -> "DemographicModel":
        b = np.asarray(b, dtype=float)
        n = len(b)
        if values is None:
            values = [(float(i),) for i in range(n)]
        traits = tuple(TraitRecord(i, v) for i, v in enumerate(values))
        mu = np.zeros(n) if mu is None else mu
        return cls(traits, b, d, alpha, mu, m=m, **scales)

    @classmethod
    def from_families(cls, families: TraitFamilies, values, lower, upper, **scales) -> "DemographicModel":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        traits = tuple(TraitRecord(i, v) for i, v in enumerate(values))
        rates = families.rates(values)
        alpha = families.competition.matrix(values)
        return cls(
            traits, rates["b"], rates["d"], alpha, rates["mu"],
            families=families, lower=tuple(lower), upper=tuple(upper), **scales,
        )

    def with_trait(self, record: TraitRecord) -> "DemographicModel":
        if self.families is None:
            raise ValidationError("tabular models cannot evaluate rates at new traits")
        values = np.vstack([self.values, np.asarray(record.value)[None, :]])
        rates = self.families.rates(values[-1:])
        alpha = self.families.competition.matrix(values)
        return replace(
            self,
            traits=self.traits + (record,),
            b=np.append(self.b, rates["b"]),
            d=np.append(self.d, rates["d"]),
            mu=np.append(self.mu, rates["mu"]),
            alpha=alpha,
        )

    def with_scales(self, **scales) -> "DemographicModel":
        return replace(self, **scales)

    # -- views --------------------------------------------------------------

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.traits)

    @property
    def values(self) -> np.ndarray:
        return np.array([t.value for t in self.traits], dtype=float)

    @property
    def r(self) -> np.ndarray:
        return self.b - self.d

    @property
    def xi_bar(self) -> np.ndarray:
        return self.r / np.diag(self.alpha)

    def index(self, trait_id: int) -> int:
        return self._index[trait_id]


def sample_mutation(model: DemographicModel, parent_value, rng: np.random.Generator, max_tries: int = 10_000):
    """Gaussian step h around ``parent_value``, redrawn until parent + h lies in the trait box."""
    if model.families is None:
        raise ValidationError("mutation needs a parametric model")
    x = np.asarray(parent_value, dtype=float)
    sd = model.families.mutation_sd
    lo = None if model.lower is None else np.asarray(model.lower)
    hi = None if model.upper is None else np.asarray(model.upper)
    for _ in range(max_tries):
        h = rng.normal(0.0, sd, size=x.shape)
        y = x + h
        if lo is None or (np.all(y >= lo) and np.all(y <= hi)):
            return h
    raise ValidationError(f"mutation kernel could not place a mutant inside the box from {tuple(x)}")


# ---------------------------------------------------------------------------
# fitness and order


@dataclass(frozen=True, eq=False)
class FitnessReport:
    ids: tuple[int, ...]
    xi_bar: np.ndarray
    f: np.ndarray
    order: tuple[int, ...]  # positions into ids, least fit first

    @property
    def ordered_ids(self) -> tuple[int, ...]:
        return tuple(self.ids[i] for i in self.order)

    def _pos(self, trait_id: int) -> int:
        return self.ids.index(trait_id)

    def fitness(self, x_id: int, y_id: int) -> float:
        """Invasion fitness of ``x_id`` in a resident ``y_id`` population at equilibrium."""
        return float(self.f[self._pos(x_id), self._pos(y_id)])

    def xi(self, trait_id: int) -> float:
        return float(self.xi_bar[self._pos(trait_id)])

    def ordered_f(self) -> np.ndarray:
        idx = np.asarray(self.order)
        return self.f[np.ix_(idx, idx)]

    def ordered_xi(self) -> np.ndarray:
        return self.xi_bar[np.asarray(self.order)]


def fitness_matrix(r: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    xi = r / np.diag(alpha)
    f = r[:, None] - alpha * xi[None, :]
    np.fill_diagonal(f, 0.0)
    return f


def _strict_order(f: np.ndarray, comparable: np.ndarray, ids, tol: float) -> tuple[int, ...]:
    n = f.shape[0]
    above = [[] for _ in range(n)]
    indeg = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if not comparable[i, j]:
                continue
            fij, fji = f[i, j], f[j, i]
            if fij > tol and fji < -tol:
                lo, hi = j, i
            elif fij < -tol and fji > tol:
                lo, hi = i, j
            else:
                raise OrderViolation(
                    f"traits {ids[i]} and {ids[j]} are not strictly ordered: "
                    f"f({ids[i]},{ids[j]}) = {fij:.6g}, f({ids[j]},{ids[i]}) = {fji:.6g}"
                )
            above[lo].append(hi)
            indeg[hi] += 1
    order = []
    sources = [k for k in range(n) if indeg[k] == 0]
    while sources:
        if len(sources) > 1:
            names = ", ".join(str(ids[k]) for k in sources)
            raise OrderViolation(f"no total fitness order: traits {names} are mutually unranked")
        k = sources.pop()
        order.append(k)
        for h in above[k]:
            indeg[h] -= 1
            if indeg[h] == 0:
                sources.append(h)
    if len(order) != n:
        raise OrderViolation("invasion relation contains a cycle")
    return tuple(order)


def compute_fitness(model: DemographicModel, tol: float = FITNESS_TOL) -> FitnessReport:
    """Equilibrium masses, pairwise invasion fitness and the total fitness order.

    Pairs of traits that do not compete in either direction carry no fitness
    information; the order over them is fixed by transitivity, and must come
    out unique.
    """
    f = fitness_matrix(model.r, model.alpha)
    comparable = (model.alpha + model.alpha.T) > 0
    order = _strict_order(f, comparable, model.ids, tol)
    return FitnessReport(model.ids, _frozen(model.xi_bar), _frozen(f), order)


def neighbour_migration(n: int) -> np.ndarray:
    """Row-stochastic nearest-neighbour kernel in order indexing: 1/2 each side, 1 at the ends."""
    m = np.zeros((n, n))
    for i in range(n):
        nbrs = [j for j in (i - 1, i + 1) if 0 <= j < n]
        for j in nbrs:
            m[i, j] = 1.0 / len(nbrs)
    return m


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def passed(self, name: str) -> bool:
        return self[name].passed

    @property
    def conditions_hold(self) -> bool:
        """Order, sparsity, timing and ratio conditions behind the closed-form limit profile."""
        return all(self.passed(n) for n in ("C2-order", "C2-sparsity", "C3", "C4-ratio", "C4-recovery"))

    def to_dict(self) -> dict:
        return {
            "conditions_hold": self.conditions_hold,
            "checks": [
                {"name": c.name, "passed": c.passed, "violations": list(c.violations)} for c in self.checks
            ],
        }


def switch_constants(f_ord: np.ndarray, r_ord: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Invasion clock I (I[0] = 0) and recovery delays S, in fitness-order indexing."""
    L = len(r_ord) - 1
    inv = np.array([1.0 / f_ord[k, k - 1] for k in range(1, L + 1)])
    I = np.concatenate([[0.0], np.cumsum(inv)])
    S = np.array([abs(f_ord[k, k + 1]) / (f_ord[k + 2, k + 1] * r_ord[k]) for k in range(L - 1)])
    return I, S


def check_assumptions(model: DemographicModel, tol: float = FITNESS_TOL) -> AssumptionReport:
    checks = []
    a1 = []
    if np.any(model.b <= 0) or np.any(model.d <= 0):
        a1.append("b(x) > 0 and d(x) > 0")
    if np.any(model.alpha < 0):
        a1.append("alpha >= 0")
    checks.append(AssumptionCheck("A1", not a1, tuple(a1)))
    bad = [f"trait {model.traits[i].id}: b - d = {model.r[i]:.6g}" for i in np.flatnonzero(model.r <= 0)]
    checks.append(AssumptionCheck("A2", not bad, tuple(bad)))

    try:
        report = compute_fitness(model, tol)
    except OrderViolation as exc:
        checks.append(AssumptionCheck("C2-order", False, (str(exc),)))
        skipped = ("fitness order unavailable",)
        for name in ("C2-sparsity", "C3", "C4-ratio", "C4-recovery", "L5.4-first", "L5.4-second"):
            checks.append(AssumptionCheck(name, False, skipped))
        return AssumptionReport(tuple(checks))
    checks.append(AssumptionCheck("C2-order", True))

    order = np.asarray(report.order)
    oids = report.ordered_ids
    L = len(order) - 1
    sparse = []
    if model.families is None:
        alpha_o = model.alpha[np.ix_(order, order)]
        m_o = None if model.m is None else model.m[np.ix_(order, order)]
        for i in range(L + 1):
            for j in range(L + 1):
                if abs(i - j) > 1 and (alpha_o[i, j] != 0 or (m_o is not None and m_o[i, j] != 0)):
                    sparse.append(f"traits {oids[i]}, {oids[j]} interact but are not fitness neighbours")
    checks.append(AssumptionCheck("C2-sparsity", not sparse, tuple(sparse)))

    f_o = report.ordered_f()
    r_o = model.r[order]
    I, S = switch_constants(f_o, r_o)

    c3 = [
        f"i={i}: {i}/(b-d) = {i / r_o[i]:.6g} < I_{i} = {I[i]:.6g}"
        for i in range(2, L + 1)
        if not i / r_o[i] >= I[i]
    ]
    checks.append(AssumptionCheck("C3", not c3, tuple(c3)))

    ratio = []
    for i in range(L - 1):
        q = abs(f_o[i, i + 1]) / f_o[i + 2, i + 1]
        if not q < 1:
            ratio.append(f"i={i}: |f_{i},{i + 1}|/f_{i + 2},{i + 1} = {q:.6g} >= 1")
    checks.append(AssumptionCheck("C4-ratio", not ratio, tuple(ratio)))

    rec = []
    for i in range(L - 2):
        lhs = S[i] - 1.0 / f_o[i + 3, i + 2]
        if not lhs > S[i + 1]:
            rec.append(f"i={i}: S_{i} - 1/f_{i + 3},{i + 2} = {lhs:.6g} <= S_{i + 1} = {S[i + 1]:.6g}")
    checks.append(AssumptionCheck("C4-recovery", not rec, tuple(rec)))

    first = []
    for k in range(L - 2):
        rhs = I[L] - I[k + 2]
        if not S[k] > rhs:
            first.append(f"k={k}: S_{k} = {S[k]:.6g} <= I_{L} - I_{k + 2} = {rhs:.6g}")
    checks.append(AssumptionCheck("L5.4-first", not first, tuple(first)))

    second = []
    for k in range(L - 3):
        lhs = S[k] - (I[k + 4] - I[k + 2])
        if not lhs > S[k + 2]:
            second.append(f"k={k}: I_{k + 2} + S_{k} <= I_{k + 4} + S_{k + 2}")
    checks.append(AssumptionCheck("L5.4-second", not second, tuple(second)))
    return AssumptionReport(tuple(checks))


# ---------------------------------------------------------------------------
# ordered sequences and relabelling


@dataclass(frozen=True, eq=False)
class OrderedTraitSequence:
    """Trait ids ascending in fitness; index i is occupied iff (n - i) is even."""

    ordered_ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ordered_ids", _frozen(self.ordered_ids, dtype=np.int64).reshape(-1))

    def __len__(self) -> int:
        return len(self.ordered_ids)

    def __eq__(self, other) -> bool:
        return isinstance(other, OrderedTraitSequence) and np.array_equal(self.ordered_ids, other.ordered_ids)

    def __repr__(self) -> str:
        return f"OrderedTraitSequence({self.ids()})"

    @property
    def n(self) -> int:
        return len(self.ordered_ids) - 1

    def ids(self) -> tuple[int, ...]:
        return tuple(int(i) for i in self.ordered_ids)

    def is_occupied(self, index: int) -> bool:
        return (self.n - index) % 2 == 0

    @property
    def occupied_ids(self) -> np.ndarray:
        return self.ordered_ids[self.n % 2 :: 2]

    def index_of(self, trait_id: int) -> int:
        hit = np.flatnonzero(self.ordered_ids == trait_id)
        if len(hit) == 0:
            raise KeyError(trait_id)
        return int(hit[0])


def insert_at(seq: OrderedTraitSequence, mutant_id: int, rank: int) -> OrderedTraitSequence:
    if not 0 <= rank <= len(seq):
        raise ValueError(f"rank {rank} outside 0..{len(seq)}")
    return OrderedTraitSequence(np.insert(seq.ordered_ids, rank, mutant_id))


def rank_mutant(f_mut_vs: np.ndarray, f_vs_mut: np.ndarray, tol: float = FITNESS_TOL) -> int:
    """Rank of a mutant given its fitness against each ordered trait and theirs against it."""
    f_mut_vs = np.asarray(f_mut_vs, dtype=float)
    f_vs_mut = np.asarray(f_vs_mut, dtype=float)
    fitter = (f_mut_vs > tol) & (f_vs_mut < -tol)
    weaker = (f_mut_vs < -tol) & (f_vs_mut > tol)
    if not np.all(fitter | weaker):
        bad = int(np.flatnonzero(~(fitter | weaker))[0])
        raise AmbiguousRank(f"mutant is not strictly ordered against sequence position {bad}")
    rank = int(fitter.sum())
    if not (fitter[:rank].all() and weaker[rank:].all()):
        raise AmbiguousRank("mutant ranking is not consistent with the existing order")
    return rank


def insert_and_relabel(
    seq: OrderedTraitSequence, mutant: TraitRecord, report: FitnessReport, tol: float = FITNESS_TOL
) -> OrderedTraitSequence:
    ids = seq.ids()
    f_mut_vs = [report.fitness(mutant.id, y) for y in ids]
    f_vs_mut = [report.fitness(y, mutant.id) for y in ids]
    return insert_at(seq, mutant.id, rank_mutant(f_mut_vs, f_vs_mut, tol))
