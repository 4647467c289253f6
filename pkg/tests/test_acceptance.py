"""Acceptance suite: one test per contract criterion, in order.

Each test prints a single PASS line on success (run with ``-s`` or
``-v`` to see them) and embeds its expected values as literals frozen
from independent high-precision computation, so nothing here depends
on the implementation under test for its oracle.
"""

import itertools
import time

import numpy as np
import pytest
import scipy.stats

from etolab.benchmarks import build_suite
from etolab.core import BoundaryPolicy, SearchSpace, run_optimizer
from etolab.diagnostics import (
    audit_schedule,
    full_flaw_report,
    probe_update_distribution,
)
from etolab.eto import (
    EtoOptimizer,
    EtoParams,
    GAMMA_AS_PRINTED,
    GAMMA_TEXT_CLAIMED,
    coeff_alpha1,
    coeff_alpha2,
    coeff_alpha3,
    coeff_gamma,
    mode_coefficient,
    mode_switch_probability,
    oscillation_pair,
    trigger_schedule,
)
from etolab.harness import (
    AlgorithmSpec,
    ExperimentConfig,
    ExperimentResult,
    ResultRow,
    run_experiment,
    to_block_matrix,
)
from etolab.report import render_report
from etolab.stats import (
    cliffs_delta,
    dunn_sidak_adjust,
    effect_size_r,
    quartile_tags,
    wilcoxon_signed_rank,
)

T = 500

# Published omnibus rank-test rows: (chi-square, blocks N, Kendall's W),
# all with k = 10 algorithms. The identity W = chi2 / (N (k - 1)) must
# reproduce the printed W column to its three decimals.
FRIEDMAN_TRIPLES = [
    (1760.808, 250, 0.783),
    (1878.093, 250, 0.835),
    (1537.800, 250, 0.683),
    (1460.060, 250, 0.649),
    (1028.803, 250, 0.457),
    (1223.353, 250, 0.544),
    (2467.558, 725, 0.378),
    (3516.293, 725, 0.539),
    (3899.173, 725, 0.598),
    (4116.007, 725, 0.631),
]

# Published average-rank rows paired with their printed quartile tags.
RANK_ROWS = [
    ((3.46, 8.72, 8.936, 2.896, 5.028, 7.344, 3.684, 4.164, 8.156, 2.612),
     (2, 4, 4, 1, 3, 3, 2, 2, 4, 1)),
    ((3.29, 8.624, 9.296, 3.266, 5.028, 7.154, 3.046, 4.21, 8.436, 2.65),
     (2, 4, 4, 2, 3, 3, 1, 2, 4, 1)),
    ((6.336, 2.668, 2.388, 9.28, 6.352, 4.776, 1.944, 6.164, 8.248, 6.844),
     (3, 2, 1, 4, 3, 2, 1, 2, 4, 4)),
    ((6.292, 3.592, 3.092, 9.32, 6.56, 4.416, 1.364, 5.324, 8.32, 6.72),
     (3, 2, 1, 4, 3, 2, 1, 2, 4, 4)),
    ((5.936, 3.756, 2.676, 9.268, 5.484, 3.508, 4.044, 6.164, 7.708, 6.456),
     (3, 2, 1, 4, 2, 1, 2, 3, 4, 4)),
    ((6.144, 4.168, 3.052, 9.54, 5.688, 3.568, 2.556, 5.508, 8.016, 6.76),
     (3, 2, 1, 4, 3, 2, 1, 2, 4, 4)),
    ((5.979, 3.55, 2.793, 8.844, 5.44, 4.124, 4.069, 6.484, 7.026, 6.69),
     (3, 1, 1, 4, 2, 2, 2, 3, 4, 4)),
    ((6.299, 4.491, 3.099, 9.283, 5.308, 3.068, 2.672, 5.859, 8.153, 6.768),
     (3, 2, 2, 4, 2, 1, 1, 3, 4, 4)),
    ((6.214, 5.302, 3.473, 9.495, 5.258, 2.749, 2.21, 5.188, 8.472, 6.64),
     (3, 3, 2, 4, 2, 1, 1, 2, 4, 4)),
    ((6.167, 6.124, 4.019, 9.276, 5.106, 2.583, 1.8, 4.634, 8.753, 6.537),
     (3, 3, 2, 4, 2, 1, 1, 2, 4, 4)),
]

PROBE_KW = dict(n_samples=1_000_000, lower=-5.0, upper=10.0,
                resolution=0.01, t_fraction=0.5)


@pytest.fixture(scope="module")
def rule4_probes():
    """Rule-4 probes at three seeds, with the first one timed."""
    start = time.perf_counter()
    first = probe_update_distribution(4, seed=0, **PROBE_KW)
    wall = time.perf_counter() - start
    rest = [probe_update_distribution(4, seed=s, **PROBE_KW) for s in (1, 2)]
    return [first] + rest, wall


@pytest.fixture(scope="module")
def boundary_probes():
    """Rule-1 and rule-3 probes under the shared protocol."""
    return {r: probe_update_distribution(r, seed=0, **PROBE_KW)
            for r in (1, 3)}


def test_criterion_01_schedule_seeds():
    schedule = trigger_schedule(EtoParams(T=T))
    assert schedule.entries[0] == 323
    assert schedule.entries[1] == 2296
    assert all(isinstance(e, int) for e in schedule.entries)
    print("PASS criterion 01: schedule seeds 323 and 2296 exact, integer")


def test_criterion_02_inert_trigger():
    report = audit_schedule(EtoParams(T=T))
    assert report.has("INERT_TRIGGER")
    finding = report.get("INERT_TRIGGER")
    assert finding.severity == "defect"

    opt = EtoOptimizer()
    space = SearchSpace(5, -100.0, 100.0)
    run_optimizer(opt, lambda x: float(np.sum(x * x)), space,
                  n_agents=10, budget=T, seed=0)
    assert len(opt.trace.entries) == T
    assert not any(e.trigger_fired for e in opt.trace.entries)
    assert opt.contraction_log == []
    print("PASS criterion 02: INERT_TRIGGER emitted, no firing in 500 iters")


def test_criterion_03_mode_coefficient_collapse():
    envelope = mode_coefficient(1, T, 1.0)
    assert envelope == pytest.approx(1.2639, abs=1e-3)
    assert mode_switch_probability(1, T) == pytest.approx(0.2088, abs=1e-3)
    assert mode_switch_probability(T, T) == 0.0
    # past the first iteration the envelope never reaches the threshold
    for t in range(2, T + 1):
        assert mode_switch_probability(t, T) == 0.0
    print("PASS criterion 03: switch envelope 1.2639, P(1)=0.2088, P(500)=0")


def test_criterion_04_frozen_ratio_constants():
    ts = np.arange(1, T + 1, dtype=float)
    d1, d2 = oscillation_pair(ts, T)
    ratio = d1 / d2
    tan_vals = np.tan(ratio)
    exp_vals = np.exp(ratio)
    assert np.all(np.abs(tan_vals - (-1.5574)) < 1e-4)
    assert np.all(np.abs(exp_vals - 0.3679) < 1e-4)
    assert tan_vals.max() - tan_vals.min() < 1e-12
    assert exp_vals.max() - exp_vals.min() < 1e-12
    print("PASS criterion 04: tan(ratio)=-1.5574, exp(ratio)=0.3679, "
          "constant over t")


def test_criterion_05_step_scales_linear_in_time():
    ts = [1, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500]
    rs = [0.05, 0.25, 0.5, 0.75, 0.95]
    for t in ts:
        for r in rs:
            a1 = coeff_alpha1(t, T, r)
            a2 = coeff_alpha2(t, T, r)
            want1 = 0.4060 * r * (t / T - 0.85)
            want2 = 2.2225 * r * (t / T - 0.85)
            assert abs(a1 - want1) < 1e-3 * abs(a1)
            assert abs(a2 - want2) < 1e-3 * abs(a2)
    assert coeff_alpha1(424, T, 0.5) < 0.0
    assert coeff_alpha1(425, T, 0.5) == 0.0
    assert coeff_alpha1(426, T, 0.5) > 0.0
    print("PASS criterion 05: alpha1/alpha2 collapse to 0.4060/2.2225 "
          "times r(t/T-0.85); sign flips at t/T=0.85")


def test_criterion_06_drift_coefficient_range():
    assert coeff_alpha3(1, T, 0.5, 0.5) == pytest.approx(0.1981, abs=1e-3)
    assert coeff_alpha3(T, T, 0.5, 0.5) == pytest.approx(0.1846, abs=1e-3)
    print("PASS criterion 06: alpha3 at expected draws 0.1981 -> 0.1846")


def test_criterion_07_gamma_contradiction():
    gammas = np.array([coeff_gamma(t, T) for t in range(1, T + 1)])
    assert gammas.max() - gammas.min() == 0.0
    assert GAMMA_AS_PRINTED == pytest.approx(0.2107, abs=1e-3)
    assert GAMMA_TEXT_CLAIMED == pytest.approx(4.7465, abs=1e-3)
    report = full_flaw_report(EtoParams(T=T))
    assert report.has("GAMMA_CONTRADICTION")
    assert report.get("GAMMA_CONTRADICTION").severity == "defect"
    md = report.to_markdown()
    assert "0.2107" in md
    assert "4.7465" in md
    print("PASS criterion 07: gamma constant (spread 0); report flags "
          "0.2107 vs 4.7465")


def test_criterion_08_rule4_one_sided_drift(rule4_probes):
    probes, wall = rule4_probes
    assert wall <= 60.0
    shares = []
    counts = []
    for pdf, metrics in probes:
        assert metrics.positive_mass > 0.90
        shares.append(metrics.positive_mass)
        counts.append(pdf.in_range_mass * pdf.n_samples)
    for (p_i, n_i), (p_j, n_j) in itertools.combinations(
            zip(shares, counts), 2):
        pooled = (p_i + p_j) / 2.0
        sigma = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n_i + 1.0 / n_j))
        assert abs(p_i - p_j) <= 3.0 * sigma
    print(f"PASS criterion 08: rule-4 positive in-range mass "
          f"{min(shares):.4f}..{max(shares):.4f} > 0.90, stable over 3 "
          f"seeds, probe {wall:.1f}s")


def test_criterion_09_rule3_boundary_escape(boundary_probes):
    oob3 = boundary_probes[3][1].oob_fraction
    oob1 = boundary_probes[1][1].oob_fraction
    assert oob3 > oob1
    print(f"PASS criterion 09: rule-3 out-of-bounds {oob3:.4f} > "
          f"rule-1 {oob1:.4f}")


def test_criterion_10_switch_curve_matches_sampling():
    rng = np.random.default_rng(123)
    n = 200_000
    for t in (1, T // 4, T // 2, 3 * T // 4, T):
        closed = mode_switch_probability(t, T)
        draws = rng.random(n)
        freq = float(np.mean(mode_coefficient(t, T, draws) > 1.0))
        if closed == 0.0:
            # the envelope makes exceedance impossible, not merely rare
            assert freq == 0.0
        else:
            sigma = np.sqrt(closed * (1.0 - closed) / n)
            assert abs(freq - closed) <= 3.0 * sigma
    print("PASS criterion 10: closed-form switch curve within 3 sigma of "
          "sampling at 5 checkpoints")


def test_criterion_11_concordance_identity():
    k = 10
    for chi2, n_blocks, w_printed in FRIEDMAN_TRIPLES:
        w = chi2 / (n_blocks * (k - 1))
        assert abs(w - w_printed) < 0.001
    print("PASS criterion 11: W = chi2/(N(k-1)) reproduces all 10 "
          "published values within 0.001")


class TestCriterion12:
    def _enumerated_p(self, d):
        ranks = scipy.stats.rankdata(np.abs(d))
        w_obs = float(np.sum(ranks[d > 0]))
        center = float(np.sum(ranks)) / 2.0
        dist = abs(w_obs - center)
        hits = 0
        for signs in itertools.product((0, 1), repeat=len(d)):
            w = float(np.sum(ranks[np.array(signs, dtype=bool)]))
            if abs(w - center) >= dist - 1e-12:
                hits += 1
        return hits / (2 ** len(d))

    def test_criterion_12_signed_rank_exactness(self):
        rng = np.random.default_rng(42)
        checked = 0
        for n in (6, 9, 12):
            for _ in range(4):
                d = rng.standard_normal(n) * 2.0
                d = d[np.abs(d) > 1e-9]
                if len(d) < 5:
                    continue
                res = wilcoxon_signed_rank(np.zeros(len(d)), -d,
                                           mode="exact")
                assert res.used_exact
                assert res.p_value == pytest.approx(
                    self._enumerated_p(d), abs=1e-12)
                checked += 1
        assert checked >= 10

        a = np.linspace(0.0, 1.0, 250)
        b = a + np.linspace(1.0, 2.0, 250)
        res = wilcoxon_signed_rank(a, b)
        r = effect_size_r(res.z, 250)
        assert r == pytest.approx(0.867, abs=0.001)
        print(f"PASS criterion 12: exact tail == enumeration ({checked} "
              f"cases); dominance n=250 gives r={r:.4f}")


def test_criterion_13_dominance_statistic_paths_agree():
    rng = np.random.default_rng(7)
    for trial in range(500):
        n1 = int(rng.integers(2, 201))
        n2 = int(rng.integers(2, 201))
        if trial % 3 == 0:
            a = rng.integers(0, 15, n1).astype(float)
            b = rng.integers(0, 15, n2).astype(float)
        else:
            a = rng.standard_normal(n1)
            b = rng.standard_normal(n2) + rng.normal()
        brute = float(np.sign(a[:, None] - b[None, :]).sum()) / (n1 * n2)
        assert cliffs_delta(a, b) == brute
    print("PASS criterion 13: fast dominance statistic equals brute force "
          "on 500 fuzzed pairs exactly")


def test_criterion_14_quartile_rows():
    for ranks, expected in RANK_ROWS:
        assert quartile_tags(ranks) == expected
    print("PASS criterion 14: quartile tags match all 10 published rows")


def test_criterion_15_familywise_adjustment():
    assert dunn_sidak_adjust(0.05, 9) == pytest.approx(0.3698, abs=1e-4)
    rng = np.random.default_rng(5)
    for _ in range(200):
        p1, p2 = np.sort(rng.random(2))
        m = int(rng.integers(1, 40))
        assert dunn_sidak_adjust(p1, m) <= dunn_sidak_adjust(p2, m)
        assert dunn_sidak_adjust(p1, m) <= dunn_sidak_adjust(p1, m + 1)
        assert 0.0 <= dunn_sidak_adjust(p1, m) <= 1.0
    print("PASS criterion 15: Sidak(0.05, 9) = 0.3698; monotone in both "
          "arguments")


def test_criterion_16_pipeline_smoke(tmp_path):
    config = ExperimentConfig(
        suites=[build_suite("basic", 10, 10, seed=11, name="smoke")],
        algorithms=[AlgorithmSpec("eto"), AlgorithmSpec("pso"),
                    AlgorithmSpec("random-search")],
        n_runs=25, n_agents=30, budget=500, master_seed=2024,
    )

    start = time.perf_counter()
    result = run_experiment(config, tmp_path / "smoke")
    artifacts = render_report(result, tmp_path / "report")
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0

    assert len(result.rows) == 750
    assert result.failures == []

    # every best-so-far curve is non-increasing, full matrix
    assert len(result.curves) == 750
    for curve in result.curves.values():
        assert curve.shape == (500,)
        assert np.all(np.diff(curve) <= 0.0)

    # block arithmetic: 10 functions x 25 runs
    matrix = to_block_matrix(result)
    assert matrix.n_blocks == 250
    assert matrix.n_algorithms == 3

    # block arithmetic at the larger layout, shape only
    wide = build_suite("shift_rotated", 29, 10, seed=3, name="wide")
    rng = np.random.default_rng(0)
    rows = [ResultRow(alg, fn.name, 10, run, 0, float(rng.random()))
            for alg in ("a", "b")
            for fn in wide.functions
            for run in range(25)]
    synthetic = ExperimentResult(
        rows=rows, curves={}, failures=[], algorithms=("a", "b"),
        suites=[wide], n_runs=25, budget=500)
    assert to_block_matrix(synthetic).n_blocks == 725

    # byte-identical repetition of the whole experiment
    run_experiment(config, tmp_path / "smoke2")
    for name in ("results.csv", "curves.jsonl"):
        assert (tmp_path / "smoke" / name).read_bytes() \
            == (tmp_path / "smoke2" / name).read_bytes()

    # well-formed three-block report
    text = (tmp_path / "report" / "report.md").read_text()
    assert "### Rank test" in text
    assert "### Average ranks" in text
    assert "### Pairwise vs eto" in text
    assert "| 250 |" in text
    assert len(artifacts.band_csvs) == 30
    assert any(p.endswith("ranks.png") for p in artifacts.figures)
    print(f"PASS criterion 16: deterministic 750-run smoke + report in "
          f"{elapsed:.0f}s, N=250 and N=725 block shapes")
