"""Generic reference optimizers for the comparison harness.

Deliberately standard implementations: uniform random search as the
no-structure floor and an inertia-weight particle swarm as the
well-understood population baseline. Both speak the same plug-in
contract as the kernel under test, so every algorithm is scored by the
identical loop.
"""

from __future__ import annotations

import numpy as np

from .core import Optimizer, Population, SearchSpace


class RandomSearch(Optimizer):
    """Uniform resampling of the whole population every iteration."""

    name = "random-search"

    def step(self, pop: Population, t: int, space: SearchSpace,
             rng: np.random.Generator) -> np.ndarray:
        shape = (pop.n_agents, space.dim)
        return rng.random(shape) * (space.upper - space.lower) + space.lower


class ParticleSwarm(Optimizer):
    """Inertia-weight velocity particle swarm.

    v <- w v + c1 u1 (pbest - x) + c2 u2 (gbest - x), with per-coordinate
    uniform draws u1, u2 and the usual constriction-style constants.
    Velocities start at zero and are clamped to the interval length.
    """

    name = "pso"

    def __init__(self, inertia: float = 0.729, cognitive: float = 1.49445,
                 social: float = 1.49445):
        self.inertia = inertia
        self.cognitive = cognitive
        self.social = social
        self.velocity: np.ndarray | None = None
        self.pbest_pos: np.ndarray | None = None
        self.pbest_fit: np.ndarray | None = None

    def reset(self, space: SearchSpace, n_agents: int, budget: int,
              rng: np.random.Generator) -> None:
        self.velocity = np.zeros((n_agents, space.dim))
        self.pbest_pos = None
        self.pbest_fit = np.full(n_agents, np.inf)

    def step(self, pop: Population, t: int, space: SearchSpace,
             rng: np.random.Generator) -> np.ndarray:
        if self.pbest_pos is None:
            self.pbest_pos = pop.positions.copy()
            self.pbest_fit = pop.fitness.copy()
        else:
            improved = pop.fitness < self.pbest_fit
            self.pbest_pos[improved] = pop.positions[improved]
            self.pbest_fit[improved] = pop.fitness[improved]
        u1 = rng.random(pop.positions.shape)
        u2 = rng.random(pop.positions.shape)
        self.velocity = (
            self.inertia * self.velocity
            + self.cognitive * u1 * (self.pbest_pos - pop.positions)
            + self.social * u2 * (pop.best_position - pop.positions)
        )
        vmax = space.length
        np.clip(self.velocity, -vmax, vmax, out=self.velocity)
        return pop.positions + self.velocity
