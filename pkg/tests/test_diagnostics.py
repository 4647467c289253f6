import csv
import math

import numpy as np
import pytest

from etolab.diagnostics import (
    audit_schedule,
    constancy_check,
    full_flaw_report,
    pdf_to_csv,
    probe_update_distribution,
    stochastic_budget_report,
    switch_probability_curve,
    trace_controls,
)
from etolab.eto import GAMMA_AS_PRINTED, GAMMA_TEXT_CLAIMED, EtoParams


class TestTraceControls:
    def test_shapes_and_envelope_order(self):
        env = trace_controls(60, n_samples_per_t=64, seed=1)
        assert env.t.shape == (60,)
        for track in (env.d1, env.d2, env.gamma, env.switch_probability):
            assert track.shape == (60,)
        for name in ("mu", "alpha1", "alpha2", "alpha3"):
            e = getattr(env, name)
            assert np.all(e.lo <= e.mean + 1e-15)
            assert np.all(e.mean <= e.hi + 1e-15)

    def test_deterministic_tracks(self):
        env = trace_controls(40, n_samples_per_t=16, seed=0)
        np.testing.assert_array_equal(env.d2, -env.d1)
        assert np.all(env.gamma == env.gamma[0])

    def test_validation(self):
        with pytest.raises(ValueError):
            trace_controls(0)
        with pytest.raises(ValueError):
            trace_controls(10, n_samples_per_t=0)


class TestConstancyCheck:
    def test_constant_series(self):
        ok, spread = constancy_check([2.0, 2.0, 2.0])
        assert ok and spread == 0.0

    def test_spread_reported(self):
        ok, spread = constancy_check([1.0, 3.0], tol=1.0)
        assert not ok and spread == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            constancy_check([])


class TestAuditSchedule:
    def test_stock_parameters_flag_inert_trigger(self):
        report = audit_schedule(EtoParams(T=500))
        assert report.has("INERT_TRIGGER")
        finding = report.get("INERT_TRIGGER")
        assert finding.severity == "defect"
        assert finding.measured == 2296

    def test_active_schedule_reports_info(self):
        report = audit_schedule(EtoParams(T=500, a=1.5))
        assert not report.has("INERT_TRIGGER")
        assert report.has("TRIGGER_ACTIVE")
        assert "178" in report.get("TRIGGER_ACTIVE").measured


class TestSwitchCurve:
    def test_first_entry_is_t1(self):
        curve = switch_probability_curve(500)
        assert curve.shape == (500,)
        assert curve[0] == pytest.approx(0.20877202617936703, abs=1e-12)
        assert np.all(curve[1:] == 0.0)

    def test_threshold_passthrough(self):
        relaxed = switch_probability_curve(100, threshold=1e-3)
        assert np.all(relaxed >= switch_probability_curve(100))


class TestProbe:
    def test_mass_accounting(self):
        pdf, metrics = probe_update_distribution(1, n_samples=20_000, seed=3)
        assert pdf.mass.shape == (100,)
        total = pdf.in_range_mass + pdf.oob_low + pdf.oob_high
        assert total == pytest.approx(1.0, abs=1e-12)
        assert metrics.oob_fraction == pytest.approx(
            pdf.oob_low + pdf.oob_high, abs=1e-12)

    def test_deterministic_per_seed_and_chunking(self):
        a = probe_update_distribution(2, n_samples=10_000, seed=5)
        b = probe_update_distribution(2, n_samples=10_000, seed=5)
        np.testing.assert_array_equal(a[0].mass, b[0].mass)
        assert a[1] == b[1]
        c = probe_update_distribution(2, n_samples=10_000, seed=6)
        assert not np.array_equal(a[0].mass, c[0].mass)

    def test_chunked_histogram_merges_exactly(self):
        merged = probe_update_distribution(1, n_samples=30_000, seed=7,
                                           n_chunks=3)
        again = probe_update_distribution(1, n_samples=30_000, seed=7,
                                          n_chunks=3)
        np.testing.assert_array_equal(merged[0].mass, again[0].mass)

    def test_rule4_bias_depends_on_gamma(self):
        _, claimed = probe_update_distribution(
            4, n_samples=50_000, seed=0, gamma=GAMMA_TEXT_CLAIMED)
        _, printed = probe_update_distribution(
            4, n_samples=50_000, seed=0, gamma=GAMMA_AS_PRINTED)
        # the claimed constant is ~22x larger and pushes far more mass up
        assert claimed.positive_mass > printed.positive_mass
        assert claimed.oob_fraction > printed.oob_fraction

    def test_metrics_match_histogram_recomputation(self):
        # with the domain symmetric about 0, one bin edge lands exactly on 0,
        # so the histogram mass above it must reproduce positive_mass
        pdf, metrics = probe_update_distribution(3, n_samples=5_000, seed=9,
                                                 lower=-2.0, upper=2.0)
        zero_idx = int(np.argmin(np.abs(pdf.bin_edges)))
        assert pdf.bin_edges[zero_idx] == 0.0
        positive = pdf.mass[zero_idx:].sum() / pdf.in_range_mass
        assert metrics.positive_mass == pytest.approx(positive, abs=1e-3)
        assert metrics.skew_proxy == pytest.approx(
            metrics.mean - metrics.median, abs=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            probe_update_distribution(5)
        with pytest.raises(ValueError):
            probe_update_distribution(1, lower=3.0, upper=1.0)
        with pytest.raises(ValueError):
            probe_update_distribution(1, resolution=0.0)
        with pytest.raises(ValueError):
            probe_update_distribution(1, t_fraction=0.0)
        with pytest.raises(ValueError):
            probe_update_distribution(1, n_samples=0)


class TestPdfCsv:
    def test_rows_and_parse(self, tmp_path):
        pdf, _ = probe_update_distribution(1, n_samples=2_000, seed=1)
        path = tmp_path / "pdf.csv"
        pdf_to_csv(pdf, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["bin_lo", "bin_hi", "mass"]
        assert len(rows) == 1 + len(pdf.mass)
        parsed = np.array([float(r[2]) for r in rows[1:]])
        np.testing.assert_array_equal(parsed, pdf.mass)


class TestBudgetReport:
    def test_counts(self):
        report = stochastic_budget_report()
        assert len(report.union) == 14
        assert report.shared_per_iteration == 1
        assert report.trigger_per_agent == 2
        assert report.per_agent == {"rule1": 2, "rule2": 4,
                                    "rule3": 4, "rule4": 3}

    def test_markdown_lists_all_paths(self):
        md = stochastic_budget_report().to_markdown()
        for token in ("rule1", "rule2", "rule3", "rule4", "shared", "trigger"):
            assert token in md


class TestFullFlawReport:
    def test_structural_codes_present(self):
        report = full_flaw_report()
        for code in ("INERT_TRIGGER", "CONSTANT_OSCILLATION_RATIO",
                     "GAMMA_CONTRADICTION", "MODE_SWITCH_COLLAPSE",
                     "EXPLOITATION_LOCK", "ALPHA_SIGN_PROFILE",
                     "ALPHA3_STAGNANT", "RULE4_ONE_SIDED_DRIFT",
                     "SATURATED_DRAW_BUDGET"):
            assert report.has(code), code

    def test_gamma_contradiction_presents_both_values(self):
        finding = full_flaw_report().get("GAMMA_CONTRADICTION")
        text = f"{finding.measured} {finding.expected} {finding.detail}"
        assert f"{GAMMA_AS_PRINTED:.4f}" in text
        assert f"{GAMMA_TEXT_CLAIMED:.4f}" in text

    def test_probe_upgrades_findings(self):
        probes = {
            rule: probe_update_distribution(rule, n_samples=30_000, seed=0)
            for rule in (1, 3, 4)
        }
        report = full_flaw_report(probes=probes)
        assert report.has("RULE3_BOUNDARY_ESCAPE")
        drift = report.get("RULE4_ONE_SIDED_DRIFT")
        assert "positive in-range mass" in str(drift.measured)

    def test_markdown_renders_every_finding(self):
        report = full_flaw_report()
        md = report.to_markdown()
        for code in report.codes:
            assert code in md

    def test_active_trigger_drops_inert_finding(self):
        report = full_flaw_report(params=EtoParams(T=500, a=1.5))
        assert not report.has("INERT_TRIGGER")
        assert report.has("TRIGGER_ACTIVE")
