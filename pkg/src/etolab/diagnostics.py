"""Structural audits of the kernel: what the control machinery actually does.

The kernel implements its defining formulas literally; this module
measures the consequences. The main findings it can establish:

* the trigger schedule is inert at the stock parameters (first firing
  candidate far beyond the budget), so the contraction branch is dead;
* the oscillation ratio is the constant -1, freezing every tangent and
  exponential term built on it;
* mode switching is only possible at the very start of a run and never
  after the phase boundary, so the second phase always runs the drift
  rule;
* the drift rule's displacement is one-sided, pushing mass toward the
  positive region, and the expansion rule ejects agents from the box;
* the two published values of the drift constant contradict each other
  (printed formula vs. claimed simplification).

Probes run the update rules exactly as the kernel defines them, on raw
(unclamped) coordinates, so the measured geometry is the rules' own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from .eto import (
    DRAW_TABLE,
    GAMMA_AS_PRINTED,
    GAMMA_TEXT_CLAIMED,
    EtoParams,
    coeff_alpha1,
    coeff_alpha2,
    coeff_alpha3,
    mode_switch_probability,
    oscillation_pair,
    phase_boundary,
    trigger_schedule,
    update_rule_1,
    update_rule_2,
    update_rule_3,
    update_rule_4,
)


@dataclass(frozen=True)
class EmpiricalPdf:
    """Fixed-width histogram of update outputs over the probe domain.

    ``mass`` sums to the in-range fraction; adding ``oob_low`` and
    ``oob_high`` recovers 1 up to float rounding.
    """

    bin_edges: np.ndarray
    mass: np.ndarray
    oob_low: float
    oob_high: float
    n_samples: int

    @property
    def in_range_mass(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class BiasMetrics:
    """Location/asymmetry summary of raw probe outputs.

    ``positive_mass`` is the fraction of in-range outputs strictly above
    zero (the sign bias the drift rule induces); ``above_midpoint_mass``
    is the same relative to the domain midpoint. ``skew_proxy`` is
    ``mean - median``.
    """

    mean: float
    median: float
    oob_fraction: float
    positive_mass: float
    above_midpoint_mass: float
    skew_proxy: float


@dataclass(frozen=True)
class Finding:
    code: str
    severity: str           # "defect" | "warning" | "info"
    detail: str
    measured: float | str | None = None
    expected: float | str | None = None


@dataclass
class FlawReport:
    """Ordered list of findings with a markdown rendering."""

    findings: list[Finding] = field(default_factory=list)

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(f.code for f in self.findings)

    def has(self, code: str) -> bool:
        return code in self.codes

    def get(self, code: str) -> Finding:
        for f in self.findings:
            if f.code == code:
                return f
        raise KeyError(code)

    def extend(self, other: "FlawReport") -> None:
        self.findings.extend(other.findings)

    def to_markdown(self) -> str:
        lines = [
            "| code | severity | measured | expected | detail |",
            "| --- | --- | --- | --- | --- |",
        ]
        for f in self.findings:
            measured = "" if f.measured is None else str(f.measured)
            expected = "" if f.expected is None else str(f.expected)
            lines.append(
                f"| {f.code} | {f.severity} | {measured} | {expected} | {f.detail} |"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Envelope:
    """Per-iteration min/mean/max of a sampled coefficient."""

    lo: np.ndarray
    mean: np.ndarray
    hi: np.ndarray


@dataclass(frozen=True)
class ControlEnvelopes:
    """Deterministic coefficient tracks plus sampled envelopes over t = 1..T."""

    t: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    gamma: np.ndarray
    switch_probability: np.ndarray
    mu: Envelope
    alpha1: Envelope
    alpha2: Envelope
    alpha3: Envelope


def _envelope(matrix: np.ndarray) -> Envelope:
    return Envelope(lo=matrix.min(axis=1), mean=matrix.mean(axis=1),
                    hi=matrix.max(axis=1))


def trace_controls(T: int, n_samples_per_t: int = 1000,
                   seed: int = 0) -> ControlEnvelopes:
    """Sample every control coefficient across a full budget.

    Deterministic terms (``d1``, ``d2``, ``gamma``) are evaluated
    exactly; stochastic coefficients get min/mean/max envelopes over
    ``n_samples_per_t`` independent draw sets per iteration. Draw
    blocks are consumed in the order r1, r4, r6, r10, r11, each of
    shape (T, n).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if n_samples_per_t < 1:
        raise ValueError("n_samples_per_t must be >= 1")
    rng = np.random.default_rng(seed)
    ts = np.arange(1, T + 1, dtype=float)
    d1, d2 = oscillation_pair(ts, T)
    ratio = d1 / d2
    gamma = np.exp(np.tan(ratio))

    r1 = rng.random((T, n_samples_per_t))
    r4 = rng.random((T, n_samples_per_t))
    r6 = rng.random((T, n_samples_per_t))
    r10 = rng.random((T, n_samples_per_t))
    r11 = rng.random((T, n_samples_per_t))

    mu_env = 0.01 * np.sqrt(ts / T) ** np.tan(ratio)
    mu = mu_env[:, None] * r1
    tcol = ts[:, None]
    alpha1 = coeff_alpha1(tcol, T, r4)
    alpha2 = coeff_alpha2(tcol, T, r6)
    alpha3 = coeff_alpha3(tcol, T, r10, r11)
    switch = np.array([mode_switch_probability(int(t), T) for t in ts])

    return ControlEnvelopes(
        t=ts, d1=d1, d2=d2, gamma=gamma, switch_probability=switch,
        mu=_envelope(mu), alpha1=_envelope(alpha1),
        alpha2=_envelope(alpha2), alpha3=_envelope(alpha3),
    )


def constancy_check(series, tol: float = 0.0) -> tuple[bool, float]:
    """Return (is_constant_within_tol, spread) where spread = max - min."""
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot check an empty series")
    spread = float(arr.max() - arr.min())
    return spread <= tol, spread


def audit_schedule(params: EtoParams, max_index: int = 32) -> FlawReport:
    """Audit the trigger schedule for reachability inside the budget.

    The seed entry never fires by itself; if no later entry lands in
    [1, T] the whole contraction mechanism is unreachable and the audit
    emits an ``INERT_TRIGGER`` defect carrying the first firing
    candidate.
    """
    schedule = trigger_schedule(params, max_index=max_index)
    report = FlawReport()
    seed_entry = schedule.entries[0]
    first_candidate = schedule.entries[1] if len(schedule.entries) > 1 else None
    fire_points = sorted(schedule.fire_points)
    if not fire_points:
        report.findings.append(Finding(
            code="INERT_TRIGGER",
            severity="defect",
            measured=first_candidate,
            expected=f"some entry beyond the first within [1, {params.T}]",
            detail=(
                f"trigger recurrence seeded at {seed_entry} produces no "
                f"firing step inside the budget; first candidate is "
                f"{first_candidate} > T={params.T}, so the contraction "
                f"branch is dead code at these parameters"
            ),
        ))
    else:
        report.findings.append(Finding(
            code="TRIGGER_ACTIVE",
            severity="info",
            measured=str(fire_points),
            detail=f"trigger fires inside the budget at iterations {fire_points}",
        ))
    return report


def switch_probability_curve(T: int, threshold: float = 1.0) -> np.ndarray:
    """Closed-form P[mode coefficient > threshold] for t = 1..T.

    Index i holds the probability at iteration t = i + 1. The curve is
    nonincreasing because the deterministic envelope decays; at the
    stock threshold it is already zero from t = 2 onward for any
    realistic budget.
    """
    return np.array([
        mode_switch_probability(t, T, threshold) for t in range(1, T + 1)
    ])


def probe_update_distribution(rule: int, n_samples: int = 1_000_000,
                              lower: float = -5.0, upper: float = 10.0,
                              resolution: float = 0.01,
                              t_fraction: float = 0.5, seed: int = 0,
                              gamma: float = GAMMA_TEXT_CLAIMED,
                              n_chunks: int = 1):
    """Monte-Carlo probe of one update rule's output distribution.

    Positions and the incumbent best are drawn i.i.d. uniform over
    [lower, upper]; rule coefficients are drawn fresh per sample at the
    iteration fraction ``t_fraction`` (the coefficients depend on time
    only through t/T); no boundary handling is applied, so the raw
    geometry of the rule is what lands in the histogram. Bin width is
    ``resolution`` times the domain length.

    ``gamma`` applies to rule 4 only and defaults to the method text's
    claimed drift constant (:data:`etolab.eto.GAMMA_TEXT_CLAIMED`,
    ~4.7465) because that is the value the original distribution study
    reflects; pass :data:`etolab.eto.GAMMA_AS_PRINTED` (~0.2107) to
    probe the printed formula instead. The two disagree; see
    :func:`full_flaw_report`.

    Sampling may be split across ``n_chunks`` independent substreams;
    the histogram is a sum of integer counts, so merge order cannot
    change it. Returns ``(EmpiricalPdf, BiasMetrics)``, bit-identical
    for identical (seed, n_chunks).
    """
    if rule not in (1, 2, 3, 4):
        raise ValueError(f"rule must be 1..4, got {rule}")
    if not lower < upper:
        raise ValueError("need lower < upper")
    if not 0.0 < resolution <= 1.0:
        raise ValueError("resolution must be in (0, 1]")
    if not 0.0 < t_fraction <= 1.0:
        raise ValueError("t_fraction must be in (0, 1]")
    if n_samples < 1 or n_chunks < 1:
        raise ValueError("n_samples and n_chunks must be >= 1")

    T = 1000
    t = max(1, round(t_fraction * T))
    n_bins = round(1.0 / resolution)
    edges = np.linspace(lower, upper, n_bins + 1)

    counts = np.zeros(n_bins, dtype=np.int64)
    n_low = 0
    n_high = 0
    chunks = []
    base = n_samples // n_chunks
    sizes = [base + (1 if i < n_samples % n_chunks else 0)
             for i in range(n_chunks)]
    for i, m in enumerate(sizes):
        if m == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        x = rng.random(m) * (upper - lower) + lower
        x_best = rng.random(m) * (upper - lower) + lower
        if rule == 1:
            alpha1 = coeff_alpha1(t, T, rng.random(m))
            out = update_rule_1(x, x_best, alpha1, rng.random(m))
        elif rule == 2:
            alpha2 = coeff_alpha2(t, T, rng.random(m))
            out = update_rule_2(x, x_best, alpha2, rng.random(m),
                                rng.random(m), rng.random(m))
        elif rule == 3:
            alpha3 = coeff_alpha3(t, T, rng.random(m), rng.random(m))
            out = update_rule_3(x, x_best, alpha3, rng.random(m),
                                rng.random(m))
        else:
            alpha3 = coeff_alpha3(t, T, rng.random(m), rng.random(m))
            out = update_rule_4(x, x_best, alpha3, gamma, rng.random(m))
        counts += np.histogram(out, bins=edges)[0]
        n_low += int(np.count_nonzero(out < lower))
        n_high += int(np.count_nonzero(out > upper))
        chunks.append(out)

    outputs = np.concatenate(chunks)
    pdf = EmpiricalPdf(
        bin_edges=edges,
        mass=counts / n_samples,
        oob_low=n_low / n_samples,
        oob_high=n_high / n_samples,
        n_samples=n_samples,
    )
    in_range = (outputs >= lower) & (outputs <= upper)
    n_in = int(np.count_nonzero(in_range))
    midpoint = 0.5 * (lower + upper)
    if n_in:
        positive = np.count_nonzero(in_range & (outputs > 0.0)) / n_in
        above_mid = np.count_nonzero(in_range & (outputs > midpoint)) / n_in
    else:
        positive = math.nan
        above_mid = math.nan
    mean = float(outputs.mean())
    median = float(np.median(outputs))
    metrics = BiasMetrics(
        mean=mean,
        median=median,
        oob_fraction=(n_low + n_high) / n_samples,
        positive_mass=float(positive),
        above_midpoint_mass=float(above_mid),
        skew_proxy=mean - median,
    )
    return pdf, metrics


def pdf_to_csv(pdf: EmpiricalPdf, path) -> None:
    """Write the histogram as (bin_lo, bin_hi, mass) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "mass"])
        for lo, hi, m in zip(pdf.bin_edges[:-1], pdf.bin_edges[1:], pdf.mass):
            writer.writerow([repr(float(lo)), repr(float(hi)), repr(float(m))])


@dataclass(frozen=True)
class BudgetReport:
    """Named-draw consumption per control path.

    ``per_agent`` counts the draws each rule path consumes per agent
    per iteration (the shared draw and trigger draws are listed
    separately); ``union`` is every named draw the kernel can consume.
    """

    paths: dict
    per_agent: dict
    shared_per_iteration: int
    trigger_per_agent: int
    union: tuple

    def to_markdown(self) -> str:
        lines = [
            "| path | named draws | per agent per iteration |",
            "| --- | --- | --- |",
        ]
        for name in ("rule1", "rule2", "rule3", "rule4"):
            draws = ", ".join(self.paths[name])
            lines.append(f"| {name} | {draws} | {self.per_agent[name]} |")
        lines.append(f"| shared | {', '.join(self.paths['shared'])} | "
                     f"{self.shared_per_iteration} per iteration |")
        lines.append(f"| trigger | {', '.join(self.paths['trigger'])} | "
                     f"{self.trigger_per_agent} when fired |")
        lines.append("")
        lines.append(f"Distinct named draws across all paths: {len(self.union)} "
                     f"({', '.join(self.union)}).")
        return "\n".join(lines) + "\n"


def stochastic_budget_report() -> BudgetReport:
    """Account for every named uniform draw the kernel can consume.

    Derived from the kernel's documented consumption table. The union
    across all paths is 14 named draws (plus the initialization draw),
    several of which are unreachable at stock parameters: the trigger
    pair rides on a dead branch and the expansion rule's pair requires a
    mode switch after the phase boundary, which has probability zero.
    """
    per_agent = {name: len(DRAW_TABLE[name])
                 for name in ("rule1", "rule2", "rule3", "rule4")}
    names = []
    for path in ("shared", "trigger", "rule1", "rule2", "rule3", "rule4"):
        for draw in DRAW_TABLE[path]:
            if draw not in names:
                names.append(draw)
    return BudgetReport(
        paths=dict(DRAW_TABLE),
        per_agent=per_agent,
        shared_per_iteration=len(DRAW_TABLE["shared"]),
        trigger_per_agent=len(DRAW_TABLE["trigger"]),
        union=tuple(names),
    )


def full_flaw_report(params: EtoParams | None = None,
                     probes: dict | None = None) -> FlawReport:
    """Assemble the complete structural audit for one parameterization.

    ``probes`` optionally maps rule number to the ``(EmpiricalPdf,
    BiasMetrics)`` pair from :func:`probe_update_distribution`, which
    upgrades the drift/escape findings from structural statements to
    measured ones.
    """
    if params is None:
        params = EtoParams(T=500)
    T = params.T
    report = FlawReport()
    report.extend(audit_schedule(params))

    ts = np.arange(1, T + 1, dtype=float)
    d1, d2 = oscillation_pair(ts, T)
    ratio = d1 / d2
    _, ratio_spread = constancy_check(ratio)
    report.findings.append(Finding(
        code="CONSTANT_OSCILLATION_RATIO",
        severity="defect",
        measured=f"spread {ratio_spread:.3g} around {float(ratio[0]):.0f}",
        expected="a time-varying ratio",
        detail=(
            "the oscillation pair is an exact negation, so d1/d2 is the "
            f"constant -1 for every iteration; tan(d1/d2) = {math.tan(-1.0):.4f} "
            f"and exp(d1/d2) = {math.exp(-1.0):.4f} are frozen, collapsing "
            "both first-phase coefficients to fixed linear ramps"
        ),
    ))
    report.findings.append(Finding(
        code="GAMMA_CONTRADICTION",
        severity="defect",
        measured=f"printed formula: {GAMMA_AS_PRINTED:.4f}",
        expected=f"text-claimed constant: {GAMMA_TEXT_CLAIMED:.4f}",
        detail=(
            "the drift coefficient's printed formula exp(tan(d1/d2)) "
            f"evaluates to exp(tan(-1)) = {GAMMA_AS_PRINTED:.4f}, while the "
            "surrounding text claims it simplifies to exp(tan(1)) = "
            f"{GAMMA_TEXT_CLAIMED:.4f}; the two differ by a factor of "
            f"{GAMMA_TEXT_CLAIMED / GAMMA_AS_PRINTED:.1f} and cannot both hold"
        ),
    ))

    curve = switch_probability_curve(T, params.switch_threshold)
    positive_ts = np.flatnonzero(curve > 0.0) + 1
    last_positive = int(positive_ts[-1]) if positive_ts.size else 0
    tp = phase_boundary(T)
    report.findings.append(Finding(
        code="MODE_SWITCH_COLLAPSE",
        severity="defect",
        measured=(f"P > 0 only for t <= {last_positive}"
                  if last_positive else "P = 0 for every t"),
        expected="a usable switching probability across the run",
        detail=(
            f"at T={T} the switch probability starts at {curve[0]:.4f} and is "
            f"exactly zero beyond t={last_positive}; the branch selector is "
            "effectively decided once at the first iteration"
        ),
    ))
    phase2_max = float(curve[tp:].max()) if tp < T else 0.0
    report.findings.append(Finding(
        code="EXPLOITATION_LOCK",
        severity="defect",
        measured=f"max P over t > {tp}: {phase2_max:.1g}",
        expected="both late-phase rules reachable",
        detail=(
            f"after the phase boundary t={tp} the switch probability is "
            "identically zero, so the expansion rule is unreachable and "
            "every late iteration runs the one-sided drift rule"
        ),
    ))

    ramp1 = coeff_alpha1(ts, T, np.ones_like(ts))
    crossing = int(np.flatnonzero(ramp1 >= 0.0)[0]) + 1
    report.findings.append(Finding(
        code="ALPHA_SIGN_PROFILE",
        severity="warning",
        measured=f"sign change at t = {crossing}",
        expected="t = ceil(0.85 T)",
        detail=(
            "both first-phase coefficients are negative multiples of the "
            "draw for the first 85% of the budget and change sign only at "
            f"t = 0.85 T (= {crossing} of {T}); the intended exploration "
            "scaling reduces to a fixed ramp through zero"
        ),
    ))

    a3_lo = float(coeff_alpha3(T, T, 0.5, 0.5))
    a3_hi = float(coeff_alpha3(1, T, 0.5, 0.5))
    report.findings.append(Finding(
        code="ALPHA3_STAGNANT",
        severity="warning",
        measured=f"[{a3_lo:.4f}, {a3_hi:.4f}] at expected draws",
        expected="a coefficient that adapts over the run",
        detail=(
            "the tanh argument is saturated for every iteration, so at "
            "expected draws the late-phase coefficient drifts only from "
            f"{a3_hi:.4f} to {a3_lo:.4f} across the entire budget"
        ),
    ))

    if probes and 4 in probes:
        _, metrics4 = probes[4]
        drift_mass = metrics4.positive_mass
        report.findings.append(Finding(
            code="RULE4_ONE_SIDED_DRIFT",
            severity="defect",
            measured=f"positive in-range mass {drift_mass:.4f}",
            expected="<= 0.9 for an unbiased update",
            detail=(
                "the drift rule adds a nonnegative displacement to every "
                "coordinate; the probe confirms the output distribution is "
                "almost entirely above zero on an asymmetric domain"
            ),
        ))
    else:
        report.findings.append(Finding(
            code="RULE4_ONE_SIDED_DRIFT",
            severity="defect",
            measured="displacement >= 0 for every draw (structural)",
            expected="sign-symmetric perturbation",
            detail=(
                "the drift rule has no sign branch: its displacement is "
                "gamma times an absolute value, so repeated application "
                "systematically shifts agents toward larger coordinates"
            ),
        ))
    if probes and 3 in probes and 1 in probes:
        _, m3 = probes[3]
        _, m1 = probes[1]
        report.findings.append(Finding(
            code="RULE3_BOUNDARY_ESCAPE",
            severity="defect",
            measured=(f"oob fraction {m3.oob_fraction:.4f} vs "
                      f"{m1.oob_fraction:.4f} for the contraction rule"),
            expected="comparable boundary violation rates",
            detail=(
                "the expansion rule moves at least three times the distance "
                "to its attractor, ejecting a large share of agents from "
                "the search box in a single step"
            ),
        ))

    budget = stochastic_budget_report()
    report.findings.append(Finding(
        code="SATURATED_DRAW_BUDGET",
        severity="info",
        measured=f"{len(budget.union)} named draws",
        expected=None,
        detail=(
            "the per-iteration stochastic budget spans "
            f"{len(budget.union)} named uniform draws across the four "
            "paths; at stock parameters the trigger pair and the "
            "expansion pair are unreachable, so part of the budget is "
            "structurally idle"
        ),
    ))
    return report
