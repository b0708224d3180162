"""One-step agreement between the two-scale ODE simulator and the jump chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    DemographicModel,
    OrderedTraitSequence,
    compute_fitness,
    insert_and_relabel,
)
from .ode import MigrationMode, relax, simulate_two_scale

TV_TOL = 1e-3


@dataclass(frozen=True)
class StepComparison:
    seed: int
    mutant_id: int
    rank: int
    predicted_support: tuple[int, ...]
    simulated_support: tuple[int, ...]
    tv: float

    @property
    def support_match(self) -> bool:
        return self.predicted_support == self.simulated_support

    @property
    def passed(self) -> bool:
        return self.support_match and self.tv < TV_TOL


def alternating_state(model: DemographicModel, virtual_mass: float) -> np.ndarray:
    """xi_bar on every second trait down from the fittest, ``virtual_mass`` on the rest."""
    order = compute_fitness(model).order
    y = np.full(len(model.traits), virtual_mass)
    n = len(order) - 1
    for pos, idx in enumerate(order):
        if (n - pos) % 2 == 0:
            y[idx] = model.xi_bar[idx]
    return y


def relaxed_start(model: DemographicModel, mode: MigrationMode = MigrationMode.PLAIN) -> np.ndarray:
    return relax(model, alternating_state(model, model.rho), mode)


def compare_one_step(
    model: DemographicModel,
    start: np.ndarray,
    seed: int,
    mode: MigrationMode = MigrationMode.PLAIN,
    t_max_mutation_units: float = 1e4,
) -> StepComparison:
    """Run the two-scale simulator up to its first mutation, relax, and compare with the jump chain."""
    traj, events, grown = simulate_two_scale(
        model, t_max_mutation_units, seed, initial_state=start, mode=mode, stop_after_events=1
    )
    if not events:
        raise RuntimeError(f"seed {seed}: no mutation within {t_max_mutation_units} mutation time units")
    ev = events[0]
    settled = relax(grown, traj.final, mode)

    report = compute_fitness(grown)
    seq = OrderedTraitSequence(np.asarray(compute_fitness(model).ordered_ids))
    mutant = grown.traits[-1]
    predicted = insert_and_relabel(seq, mutant, report)
    occupied = set(int(i) for i in predicted.occupied_ids)
    target = np.array([grown.xi_bar[k] if tid in occupied else 0.0 for k, tid in enumerate(grown.ids)])
    sim_support = tuple(
        tid for tid in predicted.ids() if settled[grown.index(tid)] >= 0.5 * grown.xi_bar[grown.index(tid)]
    )
    pred_support = tuple(tid for tid in predicted.ids() if tid in occupied)
    tv = float(np.sum(np.abs(settled - target)))
    return StepComparison(seed, mutant.id, ev.rank, pred_support, sim_support, tv)

