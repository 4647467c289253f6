"""Population state, search-space handling and the generic optimization loop.

Everything in here is algorithm-agnostic: concrete optimizers plug into
:func:`run_optimizer` through the :class:`Optimizer` interface and only
propose new positions; boundary handling, evaluation and best-so-far
bookkeeping live in the loop so every algorithm is scored identically.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np


class OptimizerError(RuntimeError):
    """Raised when an optimizer hands back a malformed population."""


class BoundaryPolicy(str, Enum):
    """How positions that leave the search interval are treated.

    ``NONE`` leaves violations untouched (used by the distribution
    probes, which study raw update geometry), ``CLAMP`` projects onto
    the violated bound, ``REFLECT`` folds the overshoot back across the
    bound once and clamps any remainder, ``RESAMPLE`` redraws violated
    coordinates uniformly inside the interval.
    """

    NONE = "none"
    CLAMP = "clamp"
    REFLECT = "reflect"
    RESAMPLE = "resample"


@dataclass(frozen=True)
class SearchSpace:
    """Axis-aligned box with one scalar bound pair for all coordinates.

    Parameters
    ----------
    dim : int
        Number of coordinates, at least 1.
    lower, upper : float
        Scalar bounds applied to every coordinate. Must be finite and
        satisfy ``lower <= upper``.
    """

    dim: int
    lower: float
    upper: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("bounds must be finite")
        if self.lower > self.upper:
            raise ValueError(
                f"invalid space: lower {self.lower} > upper {self.upper}"
            )

    @property
    def length(self) -> float:
        return self.upper - self.lower


@dataclass
class Population:
    """Positions and fitness of all agents plus the incumbent best.

    ``fitness`` is a +inf placeholder until the first evaluation pass;
    ``best_position`` holds NaNs until then. Single-owner per run: the
    loop mutates it in place.
    """

    positions: np.ndarray          # (n_agents, dim)
    fitness: np.ndarray            # (n_agents,)
    best_position: np.ndarray      # (dim,)
    best_fitness: float

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one optimization run.

    ``curve[t-1]`` is the best fitness seen up to and including
    iteration ``t``; ``evaluations`` counts objective calls, which is
    ``n_agents * (T + 1)`` (initial pass plus one per iteration).
    """

    curve: np.ndarray
    final_fitness: float
    seed: int
    evaluations: int


class Optimizer(ABC):
    """Plug-in contract for population-based optimizers.

    The loop calls :meth:`reset` once per run and then :meth:`step`
    exactly once per iteration with the full population state (previous
    positions, fitness and the synchronous best). ``step`` returns the
    proposed positions; it must not evaluate the objective or apply
    boundary handling itself.
    """

    name: str = "optimizer"

    def reset(self, space: SearchSpace, n_agents: int, budget: int,
              rng: np.random.Generator) -> None:
        """Prepare per-run state. Default is stateless."""

    @abstractmethod
    def step(self, pop: Population, t: int, space: SearchSpace,
             rng: np.random.Generator) -> np.ndarray:
        """Return proposed positions of shape (n_agents, dim) for iteration t."""


def init_population(space: SearchSpace, n_agents: int,
                    rng: np.random.Generator) -> Population:
    """Draw the initial population uniformly inside the space.

    Every coordinate is ``r0 * (upper - lower) + lower`` with an
    independent ``r0 ~ U(0, 1)`` per coordinate. Fitness stays unset
    (+inf placeholder) until the first evaluation pass.
    """
    if n_agents < 1:
        raise ValueError(f"n_agents must be >= 1, got {n_agents}")
    r0 = rng.random((n_agents, space.dim))
    positions = r0 * (space.upper - space.lower) + space.lower
    return Population(
        positions=positions,
        fitness=np.full(n_agents, np.inf),
        best_position=np.full(space.dim, np.nan),
        best_fitness=np.inf,
    )


def evaluate(objective, pop: Population) -> Population:
    """Score every agent and update the incumbent best in place.

    ``fitness[i] = objective(positions[i])``; objectives exposing an
    ``evaluate_batch(positions)`` method are called once on the whole
    matrix instead (same values, fewer Python-level calls). Non-finite
    outputs are recorded as +inf so a diverged agent disqualifies itself
    without aborting the run. The best is replaced only by a strictly
    smaller fitness; ties keep the incumbent.
    """
    batch = getattr(objective, "evaluate_batch", None)
    if batch is not None:
        values = np.asarray(batch(pop.positions), dtype=float)
    else:
        values = np.array([float(objective(row)) for row in pop.positions])
    values = np.where(np.isfinite(values), values, np.inf)
    pop.fitness = values
    idx = int(np.argmin(values))
    if values[idx] < pop.best_fitness:
        pop.best_fitness = float(values[idx])
        pop.best_position = pop.positions[idx].copy()
    return pop


def apply_boundary(position: np.ndarray, space: SearchSpace,
                   policy: BoundaryPolicy,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Return positions corrected according to ``policy``.

    Accepts any array whose trailing layout is coordinate values; the
    correction is elementwise. ``RESAMPLE`` draws one uniform per
    violated element in flat (row-major) order and therefore needs
    ``rng``. Already-feasible input comes back unchanged under every
    policy.
    """
    policy = BoundaryPolicy(policy)
    if policy is BoundaryPolicy.NONE:
        return np.array(position, dtype=float, copy=True)
    out = np.array(position, dtype=float, copy=True)
    lo, hi = space.lower, space.upper
    if policy is BoundaryPolicy.CLAMP:
        return np.clip(out, lo, hi)
    if policy is BoundaryPolicy.REFLECT:
        # masks from the input, so each element folds at most once
        over = out > hi
        under = out < lo
        out[over] = 2.0 * hi - out[over]
        out[under] = 2.0 * lo - out[under]
        return np.clip(out, lo, hi)
    if policy is BoundaryPolicy.RESAMPLE:
        if rng is None:
            raise ValueError("resample policy requires an rng")
        flat = out.reshape(-1)
        violated = np.flatnonzero((flat < lo) | (flat > hi))
        if violated.size:
            flat[violated] = rng.random(violated.size) * (hi - lo) + lo
        return flat.reshape(out.shape)
    raise ValueError(f"unknown boundary policy: {policy!r}")


def run_optimizer(optimizer: Optimizer, objective, space: SearchSpace,
                  n_agents: int, budget: int, seed: int,
                  boundary: BoundaryPolicy = BoundaryPolicy.CLAMP) -> RunRecord:
    """Execute one full run and return its record.

    The loop is the single owner of evaluation and boundary handling:
    initialize uniformly, evaluate, then for ``t = 1..budget`` ask the
    optimizer for new positions, correct them, evaluate, and update the
    best synchronously at iteration end. Identical ``seed`` gives a
    bit-identical record. A proposal with the wrong shape or non-finite
    entries after boundary handling aborts with :class:`OptimizerError`.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    optimizer.reset(space, n_agents, budget, rng)
    pop = init_population(space, n_agents, rng)
    evaluate(objective, pop)
    evaluations = n_agents
    curve = np.empty(budget)
    for t in range(1, budget + 1):
        proposed = np.asarray(optimizer.step(pop, t, space, rng), dtype=float)
        if proposed.shape != (n_agents, space.dim):
            raise OptimizerError(
                f"{optimizer.name}: step returned shape {proposed.shape}, "
                f"expected {(n_agents, space.dim)} at iteration {t}"
            )
        corrected = apply_boundary(proposed, space, boundary, rng)
        if not np.all(np.isfinite(corrected)):
            raise OptimizerError(
                f"{optimizer.name}: non-finite positions after boundary "
                f"handling at iteration {t}"
            )
        pop.positions = corrected
        evaluate(objective, pop)
        evaluations += n_agents
        curve[t - 1] = pop.best_fitness
    return RunRecord(
        curve=curve,
        final_fitness=float(pop.best_fitness),
        seed=int(seed),
        evaluations=evaluations,
    )
