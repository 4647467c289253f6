"""Exponential-trigonometric optimizer kernel, instrumented for forensics.

The kernel implements the method exactly as its defining formulas are
written, including the parts that collapse to constants: the oscillation
pair always satisfies ``d2 == -d1``, so every ``tan(d1/d2)`` term is
``tan(-1)`` and the "adaptive" coefficients are fixed envelopes. Nothing
is simplified away here; the point is that an instrumented run makes the
collapse observable. See :mod:`etolab.diagnostics` for the audits built
on top.

Two gamma constants exist because the method's own description is
internally inconsistent: the printed formula ``exp(tan(d1/d2))`` yields
``GAMMA_AS_PRINTED`` (~0.2107) while the accompanying text claims the
expression simplifies to ``exp(tan(1))`` (~4.7465), kept here as
``GAMMA_TEXT_CLAIMED``. The kernel follows the printed formula; the
claimed constant is exported for the diagnostics to report against.

Random draw consumption order (the reproducibility contract)
------------------------------------------------------------
All draws come from one ``numpy.random.Generator`` in a fixed order.
Per iteration, with ``N`` agents:

1. ``r1``: one scalar (mode coefficient, shared by all agents).
2. If the trigger fires this iteration: ``r2`` then ``r3``, each one
   block of ``N`` draws (or ``N x dim`` with per-dimension draws).
3. One rule runs for the whole iteration; its draws are consumed as
   blocks of ``N`` in subscript order:

   - rule 1: ``r4``, ``r5``
   - rule 2: ``r6``, ``r7``, ``r8``, ``r9``
   - rule 3: ``r10``, ``r11``, ``r12``, ``r13``
   - rule 4: ``r10``, ``r11``, ``r14``

Multiplicative draws (``r2, r3, r7, r8, r12, r14``) become ``N x dim``
blocks when ``EtoParams.per_dimension_draws`` is set; every other draw
is always one scalar per agent (or per iteration for ``r1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from .core import (
    BoundaryPolicy,
    Optimizer,
    Population,
    SearchSpace,
    apply_boundary,
    evaluate,
)

#: Value of exp(tan(d1/d2)) as the drift formula is printed: exp(tan(-1)).
GAMMA_AS_PRINTED = math.exp(math.tan(-1.0))

#: Constant the method's text claims the same expression equals: exp(tan(+1)).
GAMMA_TEXT_CLAIMED = math.exp(math.tan(1.0))

#: Named draws consumed on each control path, in consumption order.
DRAW_TABLE: dict[str, tuple[str, ...]] = {
    "shared": ("r1",),
    "trigger": ("r2", "r3"),
    "rule1": ("r4", "r5"),
    "rule2": ("r6", "r7", "r8", "r9"),
    "rule3": ("r10", "r11", "r12", "r13"),
    "rule4": ("r10", "r11", "r14"),
}


@dataclass(frozen=True)
class EtoParams:
    """Kernel parameters.

    ``a`` and ``b`` shape the trigger recurrence, ``switch_threshold``
    is the level the mode coefficient must exceed to select the first
    rule of each phase, ``T`` is the iteration budget. The three flags
    are forensic switches: ``enforce_contraction`` actually clips
    updates into the contracted interval when a trigger fires (by
    default the interval is only recorded), ``dynamic_schedule``
    re-materializes the trigger recurrence at every iteration instead
    of once at t=1, and ``per_dimension_draws`` upgrades the
    multiplicative draws to one per coordinate.
    """

    T: int
    a: float = 4.6
    b: float = 1.55
    switch_threshold: float = 1.0
    enforce_contraction: bool = False
    dynamic_schedule: bool = False
    per_dimension_draws: bool = False

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if self.b == 0:
            raise ValueError("b must be nonzero")
        if not self.switch_threshold > 0:
            raise ValueError("switch_threshold must be positive")


@dataclass(frozen=True)
class TriggerSchedule:
    """Materialized trigger steps.

    ``entries[0]`` is the recurrence seed and never fires by itself;
    the firing candidates are the entries beyond the first that land
    inside ``[1, T]``.
    """

    entries: tuple[int, ...]
    T: int

    @property
    def fire_points(self) -> frozenset[int]:
        return frozenset(e for e in self.entries[1:] if 1 <= e <= self.T)

    def fires_at(self, t: int) -> bool:
        return t in self.fire_points


@dataclass
class EtoTraceEntry:
    """One iteration's control state.

    Coefficients whose path did not run this iteration are NaN
    (computing them anyway would consume draws and corrupt the
    documented budget); the recorded alpha values are the first agent's
    draws. ``d1``, ``d2``, ``mu``, ``gamma`` and ``phase`` are draw-free
    and always filled.
    """

    t: int
    d1: float
    d2: float
    mu: float
    alpha1: float
    alpha2: float
    alpha3: float
    gamma: float
    phase: int
    rule: int
    trigger_fired: bool


CSV_COLUMNS = ("t", "d1", "d2", "mu", "alpha1", "alpha2", "alpha3",
               "gamma", "phase", "rule", "trigger_fired")


@dataclass
class ControlTrace:
    """Per-iteration record of all control coefficients across a run."""

    entries: list[EtoTraceEntry] = field(default_factory=list)

    def append(self, entry: EtoTraceEntry) -> None:
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries], dtype=float)

    def to_csv(self, path) -> None:
        """Write one row per iteration with the pinned column order."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for e in self.entries:
                writer.writerow([
                    e.t, repr(e.d1), repr(e.d2), repr(e.mu),
                    repr(e.alpha1), repr(e.alpha2), repr(e.alpha3),
                    repr(e.gamma), e.phase, e.rule,
                    "true" if e.trigger_fired else "false",
                ])


def oscillation_pair(t, T):
    """Return the paired oscillation terms ``(d1, d2)`` at iteration t.

    ``d1 = 0.1 * exp(-0.01 t) * cos(0.5 T (1 - t/T))`` and ``d2`` is its
    exact negation, so the ratio ``d1/d2`` is -1 wherever ``d1 != 0``
    (in floating point: everywhere, since the cosine of these arguments
    never lands on exactly zero). Accepts scalar or array ``t``.
    """
    t = np.asarray(t, dtype=float)
    d1 = 0.1 * np.exp(-0.01 * t) * np.cos(0.5 * T * (1.0 - t / T))
    d2 = -d1
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def _tan_ratio(t, T) -> float:
    """tan(d1/d2) computed literally from the pair (collapses to tan(-1))."""
    d1, d2 = oscillation_pair(t, T)
    return math.tan(d1 / d2)


def mode_coefficient(t, T, r1):
    """Mode coefficient ``mu = 0.01 * r1 * sqrt(t/T) ** tan(d1/d2)``.

    The exponent is evaluated from the literal ratio, which is -1, so
    the power is ``(t/T) ** (tan(-1)/2)``: a decaying deterministic
    envelope scaled by the draw ``r1``. ``t = 0`` is rejected (zero
    raised to a negative power). ``r1`` may be an array.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1 (power of zero is singular), got {t}")
    if t > T:
        raise ValueError(f"t must be <= T={T}, got {t}")
    exponent = _tan_ratio(t, T)
    envelope = 0.01 * math.sqrt(t / T) ** exponent
    out = np.asarray(r1, dtype=float) * envelope
    if out.ndim == 0:
        return float(out)
    return out


def mode_switch_probability(t, T, threshold: float = 1.0) -> float:
    """Exact probability that the mode coefficient exceeds ``threshold``.

    With ``mu = r1 * c(t)`` and ``r1 ~ U(0, 1)``, the probability is
    ``max(0, 1 - threshold / c(t))`` where ``c(t)`` is the deterministic
    envelope. Nonincreasing in t because the envelope decays.
    """
    if t < 1 or t > T:
        raise ValueError(f"t must be in [1, T], got {t}")
    envelope = 0.01 * math.sqrt(t / T) ** _tan_ratio(t, T)
    if envelope <= threshold:
        return 0.0
    return 1.0 - threshold / envelope


def trigger_schedule(params: EtoParams, max_index: int = 32,
                     t: int = 1) -> TriggerSchedule:
    """Materialize the trigger recurrence.

    The seed entry is ``floor(1 + T/b)``; each successor is
    ``floor(2 - 2 t (T - a * prev)) + prev`` with the recurrence's
    iteration variable frozen at ``t`` (default 1). Entries are exact
    integers after the floor. A non-finite intermediate raises
    ``OverflowError`` rather than wrapping.
    """
    if max_index < 1:
        raise ValueError("max_index must be >= 1")
    T, a, b = params.T, params.a, params.b
    entries = [math.floor(1.0 + T / b)]
    for i in range(1, max_index):
        prev = entries[-1]
        raw = 2.0 - 2.0 * t * (T - a * prev)
        if not math.isfinite(raw):
            raise OverflowError(
                f"trigger recurrence overflowed at index {i + 1} "
                f"(previous entry {prev})"
            )
        entries.append(math.floor(raw) + prev)
    return TriggerSchedule(entries=tuple(int(e) for e in entries), T=T)


def contracted_bounds(x, x_best, t, T, r2, r3):
    """Per-coordinate contracted interval around the incumbent best.

    ``upper = x_best + r2 (1 - t/T) |r3 x_best - x|`` and the lower
    bound mirrors it. The width shrinks linearly to zero at ``t = T``
    and is zero whenever ``x`` already equals ``r3 * x_best``. With
    draws in [0, 1], ``lower <= upper`` holds elementwise.
    """
    x = np.asarray(x, dtype=float)
    x_best = np.asarray(x_best, dtype=float)
    radius = r2 * (1.0 - t / T) * np.abs(r3 * x_best - x)
    return x_best - radius, x_best + radius


def phase_boundary(T: int) -> int:
    """Iteration index separating the two control phases: floor(1.2 + T/2.25)."""
    return math.floor(1.2 + T / 2.25)


def coeff_alpha1(t, T, r4):
    """First-phase step coefficient ``3 r4 (t/T - 0.85) exp(d1/d2 - 1)``.

    The exponential factor is the constant ``exp(-2)``, so the whole
    coefficient is ``~0.406 * r4 * (t/T - 0.85)``: negative for the
    first 85% of the budget, crossing zero at ``t = 0.85 T``.
    """
    d1, d2 = oscillation_pair(t, T)
    return 3.0 * np.asarray(r4, dtype=float) * (t / T - 0.85) * np.exp(d1 / d2 - 1.0)


def coeff_alpha2(t, T, r6):
    """First-phase alternative coefficient ``3 r6 (t/T - 0.85) exp(|d1/d2| - 1.3)``.

    The exponential factor is ``exp(-0.3)``, giving ``~2.2225 * r6 *
    (t/T - 0.85)``: same sign profile as the rule-1 coefficient but
    ``exp(1.7)`` times larger for equal draws.
    """
    d1, d2 = oscillation_pair(t, T)
    return 3.0 * np.asarray(r6, dtype=float) * (t / T - 0.85) * np.exp(np.abs(d1 / d2) - 1.3)


def coeff_alpha3(t, T, r10, r11):
    """Second-phase coefficient ``r10 * exp(tanh(1.5 (-t/T - 0.75) - r11))``.

    The tanh argument stays deep in the saturated tail for every t, so
    at expected draws the value creeps only from ~0.198 down to ~0.185
    across an entire run.
    """
    r10 = np.asarray(r10, dtype=float)
    r11 = np.asarray(r11, dtype=float)
    return r10 * np.exp(np.tanh(1.5 * (-t / T - 0.75) - r11))


def coeff_gamma(t, T) -> float:
    """Drift coefficient ``exp(tan(d1/d2))``, constant at exp(tan(-1)).

    This is the printed formula's value (:data:`GAMMA_AS_PRINTED`); the
    text-claimed alternative is :data:`GAMMA_TEXT_CLAIMED`.
    """
    return math.exp(_tan_ratio(t, T))


def update_rule_1(x, x_best, alpha1, r5):
    """Contraction toward the best: ``x_best +/- alpha1 |x_best - x|``.

    The plus branch is taken iff ``r5 <= 0.5``. All arguments broadcast
    elementwise. ``x = x_best`` is a fixed point for any draws.
    """
    step = alpha1 * np.abs(x_best - np.asarray(x, dtype=float))
    return np.where(np.asarray(r5) <= 0.5, x_best + step, x_best - step)


def update_rule_2(x, x_best, alpha2, r7, r8, r9):
    """Perturbed contraction: ``x_best +/- r7 alpha2 |r8 x_best - x|``.

    The plus branch is taken iff ``r9 < 0.5`` (strict, unlike rules 1
    and 3). All arguments broadcast elementwise.
    """
    step = r7 * alpha2 * np.abs(r8 * x_best - np.asarray(x, dtype=float))
    return np.where(np.asarray(r9) < 0.5, x_best + step, x_best - step)


def update_rule_3(x, x_best, alpha3, r12, r13):
    """Expansion around the current position: ``x +/- 3 |r12 alpha3 x_best - x|``.

    The plus branch is taken iff ``r13 <= 0.5``. The fixed factor 3
    makes the step at least three times the distance to the (scaled)
    attractor, which is what drives this rule's boundary violations.
    """
    x = np.asarray(x, dtype=float)
    step = 3.0 * np.abs(r12 * alpha3 * x_best - x)
    return np.where(np.asarray(r13) <= 0.5, x + step, x - step)


def update_rule_4(x, x_best, alpha3, gamma, r14):
    """One-sided drift: ``x + gamma |r14 alpha3 x_best - x|``.

    There is no sign branch; the displacement is nonnegative for every
    draw, so repeated application can only push coordinates upward.
    """
    x = np.asarray(x, dtype=float)
    return x + gamma * np.abs(r14 * alpha3 * x_best - x)


def _mult_draw(rng: np.random.Generator, n: int, dim: int,
               per_dimension: bool) -> np.ndarray:
    # multiplicative draws: scalar per agent by default, per coordinate
    # behind the flag; either way shaped to broadcast against (n, dim)
    if per_dimension:
        return rng.random((n, dim))
    return rng.random(n)[:, None]


def _propose(pop: Population, t: int, params: EtoParams,
             schedule: TriggerSchedule, rng: np.random.Generator):
    """Compute proposed positions plus the trace entry for iteration t.

    Returns ``(positions, entry, bounds)`` where ``bounds`` is the
    ``(lower, upper)`` contracted-interval pair when the trigger fired,
    else None. Draw order is exactly as documented in the module
    docstring.
    """
    T = params.T
    x = pop.positions
    x_best = pop.best_position
    n, dim = x.shape

    d1, d2 = oscillation_pair(t, T)
    r1 = rng.random()
    mu = mode_coefficient(t, T, r1)

    if params.dynamic_schedule:
        schedule = trigger_schedule(params, max_index=len(schedule.entries), t=t)
    fired = schedule.fires_at(t)

    bounds = None
    if fired:
        r2 = _mult_draw(rng, n, dim, params.per_dimension_draws)
        r3 = _mult_draw(rng, n, dim, params.per_dimension_draws)
        bounds = contracted_bounds(x, x_best, t, T, r2, r3)

    gamma = coeff_gamma(t, T)
    phase = 1 if t <= phase_boundary(T) else 2
    a1 = a2 = a3 = math.nan

    if phase == 1:
        if mu > params.switch_threshold:
            rule = 1
            r4 = rng.random(n)
            r5 = rng.random(n)
            alpha1 = coeff_alpha1(t, T, r4)
            new = update_rule_1(x, x_best, alpha1[:, None], r5[:, None])
            a1 = float(alpha1[0])
        else:
            rule = 2
            r6 = rng.random(n)
            r7 = _mult_draw(rng, n, dim, params.per_dimension_draws)
            r8 = _mult_draw(rng, n, dim, params.per_dimension_draws)
            r9 = rng.random(n)
            alpha2 = coeff_alpha2(t, T, r6)
            new = update_rule_2(x, x_best, alpha2[:, None], r7, r8, r9[:, None])
            a2 = float(alpha2[0])
    else:
        r10 = rng.random(n)
        r11 = rng.random(n)
        alpha3 = coeff_alpha3(t, T, r10, r11)
        a3 = float(alpha3[0])
        if mu > params.switch_threshold:
            rule = 3
            r12 = _mult_draw(rng, n, dim, params.per_dimension_draws)
            r13 = rng.random(n)
            new = update_rule_3(x, x_best, alpha3[:, None], r12, r13[:, None])
        else:
            rule = 4
            r14 = _mult_draw(rng, n, dim, params.per_dimension_draws)
            new = update_rule_4(x, x_best, alpha3[:, None], gamma, r14)

    if fired and params.enforce_contraction:
        new = np.clip(new, bounds[0], bounds[1])

    entry = EtoTraceEntry(
        t=t, d1=d1, d2=d2, mu=mu,
        alpha1=a1, alpha2=a2, alpha3=a3, gamma=gamma,
        phase=phase, rule=rule, trigger_fired=fired,
    )
    return new, entry, bounds


def eto_step(pop: Population, t: int, objective, params: EtoParams,
             schedule: TriggerSchedule, space: SearchSpace,
             policy: BoundaryPolicy, rng: np.random.Generator):
    """Advance the population by one instrumented iteration.

    Selects the rule from the phase boundary and the mode coefficient,
    applies it to every agent, applies the boundary policy, re-evaluates
    fitness and updates the best synchronously. Returns the mutated
    population and the iteration's trace entry. When the trigger fires,
    the contracted interval is computed and recorded through the entry's
    ``trigger_fired`` flag (and enforced only under
    ``params.enforce_contraction``).
    """
    new, entry, _bounds = _propose(pop, t, params, schedule, rng)
    pop.positions = apply_boundary(new, space, policy, rng)
    evaluate(objective, pop)
    return pop, entry


class EtoOptimizer(Optimizer):
    """Optimizer-contract adapter around the instrumented kernel.

    The control trace is always on: after a run, ``self.trace`` holds
    one entry per iteration and ``self.contraction_log`` the contracted
    interval pairs for every iteration whose trigger fired.
    """

    name = "eto"

    def __init__(self, a: float = 4.6, b: float = 1.55,
                 switch_threshold: float = 1.0,
                 enforce_contraction: bool = False,
                 dynamic_schedule: bool = False,
                 per_dimension_draws: bool = False,
                 max_schedule_index: int = 32):
        self.a = a
        self.b = b
        self.switch_threshold = switch_threshold
        self.enforce_contraction = enforce_contraction
        self.dynamic_schedule = dynamic_schedule
        self.per_dimension_draws = per_dimension_draws
        self.max_schedule_index = max_schedule_index
        self.params: EtoParams | None = None
        self.schedule: TriggerSchedule | None = None
        self.trace = ControlTrace()
        self.contraction_log: list = []

    def reset(self, space: SearchSpace, n_agents: int, budget: int,
              rng: np.random.Generator) -> None:
        self.params = EtoParams(
            T=budget, a=self.a, b=self.b,
            switch_threshold=self.switch_threshold,
            enforce_contraction=self.enforce_contraction,
            dynamic_schedule=self.dynamic_schedule,
            per_dimension_draws=self.per_dimension_draws,
        )
        self.schedule = trigger_schedule(self.params, self.max_schedule_index)
        self.trace = ControlTrace()
        self.contraction_log = []

    def step(self, pop: Population, t: int, space: SearchSpace,
             rng: np.random.Generator) -> np.ndarray:
        new, entry, bounds = _propose(pop, t, self.params, self.schedule, rng)
        self.trace.append(entry)
        if bounds is not None:
            self.contraction_log.append((t, bounds))
        return new
