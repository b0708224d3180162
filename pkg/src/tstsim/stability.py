"""Fixed points and linear stability of the two-trait Lotka-Volterra system."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateKernel, ValidationError
from .model import DemographicModel
from .ode import dopri

HYPERBOLIC_TOL = 1e-10
ADMISSIBLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DimorphicSystem:
    """dn_i/dt = (r_i - sum_j alpha_ij n_j) n_i for the pair (x, y)."""

    r: np.ndarray
    alpha: np.ndarray
    labels: tuple[str, str] = ("x", "y")

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        alpha = np.array(self.alpha, dtype=float)
        if r.shape != (2,) or alpha.shape != (2, 2):
            raise ValidationError("a dimorphic system needs 2 growth rates and a 2x2 competition matrix")
        if np.any(np.diag(alpha) <= 0):
            raise ValidationError("alpha(x, x) > 0 and alpha(y, y) > 0 required")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_model(cls, model: DemographicModel, x_id: int, y_id: int) -> "DimorphicSystem":
        idx = [model.index(x_id), model.index(y_id)]
        return cls(model.r[idx], np.asarray(model.alpha)[np.ix_(idx, idx)], (str(x_id), str(y_id)))

    @property
    def xi_bar(self) -> np.ndarray:
        return self.r / np.diag(self.alpha)

    def fitness(self) -> tuple[float, float]:
        """(f(x, y), f(y, x))."""
        xi = self.xi_bar
        return (self.r[0] - self.alpha[0, 1] * xi[1], self.r[1] - self.alpha[1, 0] * xi[0])

    def jacobian(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return np.diag(self.r - self.alpha @ n) - n[:, None] * self.alpha

    def rhs(self, y: np.ndarray) -> np.ndarray:
        """Vector field on a flat batch of (n_x, n_y) pairs."""
        n = y.reshape(-1, 2)
        return ((self.r - n @ self.alpha.T) * n).ravel()


@dataclass(frozen=True)
class FixedPoint:
    name: str
    coords: tuple[float, float]
    jacobian: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: tuple[complex, complex]
    classification: str  # stable, unstable, saddle, non-hyperbolic, non-admissible

    @property
    def admissible(self) -> bool:
        return self.classification != "non-admissible"


@dataclass(frozen=True)
class EquilibriumReport:
    points: tuple[FixedPoint, ...]

    def __getitem__(self, name: str) -> FixedPoint:
        for p in self.points:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def stable(self) -> list[FixedPoint]:
        return [p for p in self.points if p.classification == "stable"]

    def to_json(self) -> str:
        def enc(z: complex):
            return [z.real, z.imag]

        doc = [
            {
                "name": p.name,
                "coords": list(p.coords),
                "jacobian": [list(row) for row in p.jacobian],
                "eigenvalues": [enc(z) for z in p.eigenvalues],
                "classification": p.classification,
            }
            for p in self.points
        ]
        return json.dumps(doc, indent=2)


def _classify(eig: np.ndarray) -> str:
    re = eig.real
    if np.any(np.abs(re) < HYPERBOLIC_TOL):
        return "non-hyperbolic"
    if np.all(re < 0):
        return "stable"
    if np.all(re > 0):
        return "unstable"
    return "saddle"


def classify_equilibria(system: DimorphicSystem) -> EquilibriumReport:
    a = system.alpha
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) <= 1e-14 * max(1.0, float(np.max(np.abs(a))) ** 2):
        raise DegenerateKernel(f"alpha(x,x)alpha(y,y) - alpha(x,y)alpha(y,x) = {det:.3g}")
    xi = system.xi_bar
    candidates = [
        ("origin", np.zeros(2)),
        ("x-only", np.array([xi[0], 0.0])),
        ("y-only", np.array([0.0, xi[1]])),
        ("interior", np.linalg.solve(a, system.r)),
    ]
    points = []
    for name, n in candidates:
        jac = system.jacobian(n)
        eig = np.linalg.eigvals(jac)
        eig = eig[np.lexsort((eig.imag, eig.real))]
        kind = _classify(eig)
        if name == "interior" and np.any(n <= ADMISSIBLE_TOL):
            kind = "non-admissible"
        points.append(
            FixedPoint(
                name,
                (float(n[0]), float(n[1])),
                tuple(tuple(float(v) for v in row) for row in jac),
                tuple(complex(z) for z in eig),
                kind,
            )
        )
    return EquilibriumReport(tuple(points))


def basin_check(system: DimorphicSystem, grid: int = 10, t_end: float = 200.0, tol: float = 1e-4) -> float:
    """Fraction of a strictly positive grid x grid lattice attracted to the unique stable point."""
    stable = classify_equilibria(system).stable
    if len(stable) != 1:
        raise ValidationError(f"basin check needs exactly one stable equilibrium, found {len(stable)}")
    target = np.array(stable[0].coords)
    top = 1.5 * float(np.max(system.xi_bar))
    axis = np.arange(1, grid + 1) / grid * top
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    y0 = np.column_stack([gx.ravel(), gy.ravel()]).ravel()
    _, ys = dopri(system.rhs, y0, 0.0, t_end, 1e-10, atol=1e-14)
    final = ys[-1].reshape(-1, 2)
    hits = np.max(np.abs(final - target), axis=1) < tol
    return float(np.mean(hits))


def random_sign_condition_system(rng: np.random.Generator) -> DimorphicSystem:
    """Random pair with f(x, y) < 0 < f(y, x), i.e. y is the fitter trait."""
    r = rng.uniform(0.5, 2.0, 2)
    diag = rng.uniform(0.5, 2.0, 2)
    xi = r / diag
    # f(x, y) = r_x - a_xy xi_y < 0  and  f(y, x) = r_y - a_yx xi_x > 0
    a_xy = r[0] / xi[1] * rng.uniform(1.1, 3.0)
    a_yx = r[1] / xi[0] * rng.uniform(0.0, 0.9)
    return DimorphicSystem(r, [[diag[0], a_xy], [a_yx, diag[1]]])
