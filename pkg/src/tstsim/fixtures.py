"""Named parameter sets used by tests, scripts and the CLI."""

from __future__ import annotations

import numpy as np

from .model import (
    CompetitionFamily,
    DemographicModel,
    RateFamily,
    TraitFamilies,
    neighbour_migration,
)

# Death rate shared by the tabular fixtures; only b = r + d enters the
# birth-weighted migration flux, so it does not affect xi_bar or f.
BASE_DEATH = 0.1


def _tabular(r, alpha, epsilon=1e-6, **kw) -> DemographicModel:
    r = np.asarray(r, dtype=float)
    d = np.full(len(r), BASE_DEATH)
    return DemographicModel.tabular(r + d, d, alpha, m=neighbour_migration(len(r)), epsilon=epsilon, **kw)


def canonical(epsilon: float = 1e-6) -> DemographicModel:
    """Three traits with xi_bar = (1, 2, 2); final configuration x0 + 2 x2."""
    alpha = [
        [1.0, 0.75, 0.0],
        [0.5, 1.0, 1.5],
        [0.0, 0.05, 0.5],
    ]
    return _tabular([1.0, 2.0, 1.0], alpha, epsilon)


def three_trait(epsilon: float = 1e-9) -> DemographicModel:
    """Three traits with xi_bar = (1, 2, 3); final configuration x0 + 3 x2."""
    alpha = [
        [1.0, 0.75, 0.0],
        [0.5, 1.0, 1.0],
        [0.0, 0.05, 1.0 / 3.0],
    ]
    return _tabular([1.0, 2.0, 1.0], alpha, epsilon)


def four_trait(epsilon: float = 1e-9) -> DemographicModel:
    """Four traits with xi_bar = (1, 2, 2, 4); final configuration 2 x1 + 4 x3.

    b - d of each trait stays below the invasion fitness of the trait just
    beneath it, so no trait outgrows the mass it receives by migration.
    """
    alpha = [
        [0.5, 0.675, 0.0, 0.0],
        [1.0, 2.0, 2.25, 0.0],
        [0.0, 0.05, 0.5, 0.5],
        [0.0, 0.0, 0.05, 0.2],
    ]
    return _tabular([0.5, 4.0, 1.0, 0.8], alpha, epsilon)


def chain_two(epsilon: float = 1e-6) -> DemographicModel:
    """L = 2 chain satisfying every assumption; its traits are the first three of :func:`chain_four`."""
    m = chain_four(epsilon)
    return _tabular(m.r[:3], np.asarray(m.alpha)[:3, :3], epsilon)


def chain_four(epsilon: float = 1e-6) -> DemographicModel:
    """L = 4 extension of :func:`chain_two` with xi_bar = (1, 2, 2, 2, 3).

    Nearest-neighbour fitness: f10 = 3, f01 = -0.5, f21 = 0.9, f12 = -1.2,
    f32 = 1.5, f23 = -0.5, f43 = 10, f34 = -1.  The ratio and recovery
    inequalities and both switch-time chains hold; the invasion-clock bound
    fails at i = 3, 4.
    """
    r = [0.1, 4.0, 1.0, 2.0, 12.0]
    alpha = [
        [0.1, 0.3, 0.0, 0.0, 0.0],
        [1.0, 2.0, 2.6, 0.0, 0.0],
        [0.0, 0.05, 0.5, 0.75, 0.0],
        [0.0, 0.0, 0.25, 1.0, 1.0],
        [0.0, 0.0, 0.0, 1.0, 4.0],
    ]
    return _tabular(r, alpha, epsilon)


def parametric(
    epsilon: float = 1e-4,
    sigma: float = 1e-2,
    rho: float = 1e-3,
    mutation_rate: float = 1.0,
    mutation_sd: float = 1.0,
    values=((0.5,),),
    competition: float = 2.0,
) -> DemographicModel:
    """One-dimensional trait space [0, 4]; b - d = 1 + x, constant competition a.

    With k = 1 the equilibrium mass is (1 + x) / a and f(x, y) = x - y, so
    the fitness order is the order of trait values.
    """
    families = TraitFamilies(
        birth=RateFamily(1.5, (1.0,)),
        death=RateFamily(0.5),
        competition=CompetitionFamily(RateFamily(competition), "constant"),
        mutation_rate=RateFamily(mutation_rate),
        mutation_sd=mutation_sd,
    )
    return DemographicModel.from_families(
        families, values, (0.0,), (4.0,), epsilon=epsilon, sigma=sigma, rho=rho
    )


TABULAR = {
    "canonical": canonical,
    "three-trait": three_trait,
    "four-trait": four_trait,
    "chain-two": chain_two,
    "chain-four": chain_four,
}
