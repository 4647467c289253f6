"""Command-line entry point.

Four subcommands cover the pipeline: ``run`` executes an experiment
from a config file, ``stats`` recomputes the comparison tables from a
results directory, ``diagnose`` audits the optimizer's control
machinery without running any benchmark, and ``report`` renders the
full markdown/CSV/figure bundle.

Exit codes: 0 success, 1 invalid input or validation failure, 2
completed with partial results (some runs failed).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import diagnostics
from .eto import EtoParams, GAMMA_TEXT_CLAIMED, trigger_schedule
from .harness import (
    ConfigError,
    load_config,
    load_results,
    run_experiment,
    to_block_matrix,
)
from .plotting import (
    plot_control_envelopes,
    plot_switch_curve,
    plot_update_pdf,
)
from .report import render_report, write_comparison_csv
from .stats import IncompleteBlocksError, compare_all, format_p


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config, args.out, workers=args.workers)
    total = len(config.algorithms) * sum(
        len(s.functions) for s in config.suites) * config.n_runs
    print(f"completed {len(result.rows)}/{total} runs "
          f"({len(result.failures)} failed) -> {args.out}")
    if result.failures:
        for failure in result.failures[:5]:
            print(f"  failed: {failure['algorithm']}/{failure['function']}"
                  f"/run{failure['run']}: {failure['reason']}",
                  file=sys.stderr)
        return 2
    return 0


def _cmd_stats(args) -> int:
    result = load_results(args.input)
    out_dir = args.out or os.path.join(args.input, "stats")
    os.makedirs(out_dir, exist_ok=True)
    for suite in result.suites:
        if args.suite and suite.name != args.suite:
            continue
        matrix = to_block_matrix(result, suite)
        comparison = compare_all(matrix, args.reference,
                                 wilcoxon_mode=args.mode)
        fr = comparison.friedman
        print(f"suite {suite.name}: N={fr.n_blocks} k={len(fr.algorithms)} "
              f"chi2={fr.chi2:.3f} df={fr.df} p={format_p(fr.p_value)} "
              f"W={fr.kendalls_w:.3f}")
        for name, rank, tag in zip(fr.algorithms, fr.avg_ranks,
                                   fr.quartile_tags):
            print(f"  {name}: avg rank {rank:.3f} (Q{tag})")
        for row in comparison.rows:
            if row.note:
                print(f"  {row.group2}: {row.note} "
                      f"(delta={row.cliffs_delta:.3f})")
            else:
                print(f"  vs {row.group2}: p={format_p(row.p_raw)} "
                      f"adj={format_p(row.p_adjusted)} r={row.effect_r:.3f} "
                      f"delta={row.cliffs_delta:.3f}")
        csv_path = os.path.join(out_dir, f"pairwise_{suite.name}.csv")
        write_comparison_csv(comparison, csv_path)
        with open(os.path.join(out_dir, f"friedman_{suite.name}.csv"),
                  "w") as fh:
            fh.write("n_blocks,k,chi2,chi2_uncorrected,df,p_value,kendalls_w\n")
            fh.write(f"{fr.n_blocks},{len(fr.algorithms)},{fr.chi2!r},"
                     f"{fr.chi2_uncorrected!r},{fr.df},{fr.p_value!r},"
                     f"{fr.kendalls_w!r}\n")
    print(f"stats written -> {out_dir}")
    return 0


def _parse_domain(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"domain must look like LO:HI, got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise ValueError(f"domain lower bound must be below upper: {text!r}")
    return lo, hi


def _cmd_diagnose(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    lower, upper = _parse_domain(args.domain)
    params = EtoParams(T=args.budget)
    gamma = args.probe_gamma if args.probe_gamma is not None \
        else GAMMA_TEXT_CLAIMED

    rules = (1, 2, 3, 4) if args.rule == "all" else (int(args.rule),)
    probes = {}
    for rule in rules:
        probes[rule] = diagnostics.probe_update_distribution(
            rule, n_samples=args.samples, lower=lower, upper=upper,
            resolution=args.resolution, seed=args.seed, gamma=gamma,
        )
        pdf, _ = probes[rule]
        csv_path = os.path.join(args.out, f"update_pdf_rule{rule}.csv")
        diagnostics.pdf_to_csv(pdf, csv_path)
        plot_update_pdf(pdf, os.path.join(args.out, f"update_pdf_rule{rule}.png"),
                        title=f"rule {rule} update distribution")

    report = diagnostics.full_flaw_report(params=params, probes=probes)
    schedule = trigger_schedule(params)
    curve = diagnostics.switch_probability_curve(args.budget,
                                                 params.switch_threshold)
    with open(os.path.join(args.out, "switch_probability.csv"), "w") as fh:
        fh.write("iteration,probability\n")
        for i, p in enumerate(curve):
            fh.write(f"{i + 1},{p!r}\n")
    plot_switch_curve(curve, os.path.join(args.out, "switch_probability.png"))

    envelopes = diagnostics.trace_controls(args.budget,
                                           n_samples_per_t=args.envelope_samples,
                                           seed=args.seed)
    plot_control_envelopes(envelopes,
                           os.path.join(args.out, "control_envelopes.png"))

    budget_report = diagnostics.stochastic_budget_report()
    lines = [
        "# Optimizer control audit",
        "",
        f"Iteration budget: {args.budget}. Probe domain: "
        f"[{lower:g}, {upper:g}], {args.samples} samples per rule, "
        f"drift coefficient {gamma:.6g}.",
        "",
        "## Restart schedule",
        "",
        f"Seed entry: {schedule.entries[0]}. Next entries: "
        f"{', '.join(str(e) for e in schedule.entries[1:9])}.",
        f"In-budget restart points: "
        f"{sorted(schedule.fire_points) if schedule.fire_points else 'none'}.",
        "",
        "## Findings",
        "",
        report.to_markdown(),
        "",
        "## Per-iteration random-draw budget",
        "",
        budget_report.to_markdown(),
    ]
    if probes:
        lines += [
            "",
            "## Update-rule probe metrics",
            "",
            "| rule | mean | median | out-of-bounds | positive mass "
            "| above midpoint |",
            "|---:|---:|---:|---:|---:|---:|",
        ]
        for rule in sorted(probes):
            _, metrics = probes[rule]
            lines.append(
                f"| {rule} | {metrics.mean:.4f} | {metrics.median:.4f} "
                f"| {metrics.oob_fraction:.4f} | {metrics.positive_mass:.4f} "
                f"| {metrics.above_midpoint_mass:.4f} |"
            )
    md_path = os.path.join(args.out, "diagnostics.md")
    with open(md_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(os.path.join(args.out, "bias_metrics.json"), "w") as fh:
        json.dump({
            str(rule): {
                "mean": metrics.mean,
                "median": metrics.median,
                "oob_fraction": metrics.oob_fraction,
                "positive_mass": metrics.positive_mass,
                "above_midpoint_mass": metrics.above_midpoint_mass,
                "skew_proxy": metrics.skew_proxy,
            } for rule, (_, metrics) in probes.items()
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")

    defects = [f.code for f in report.findings if f.severity == "defect"]
    print(f"audit complete: {len(report.findings)} findings "
          f"({len(defects)} defects: {', '.join(defects) or 'none'}) "
          f"-> {md_path}")
    return 0


def _cmd_report(args) -> int:
    result = load_results(args.input)
    artifacts = render_report(result, args.out, reference=args.reference,
                              include_figures=not args.no_figures)
    print(f"report -> {artifacts.markdown_path} "
          f"({len(artifacts.band_csvs)} band CSVs, "
          f"{len(artifacts.figures)} figures)")
    return 2 if result.failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etolab",
        description="Exponential-trigonometric optimizer lab: run benchmark "
                    "experiments, audit the optimizer's control machinery, "
                    "and render statistical reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_stats = sub.add_parser("stats",
                             help="rank tests over a results directory")
    p_stats.add_argument("--input", required=True)
    p_stats.add_argument("--reference", default="eto")
    p_stats.add_argument("--suite", default=None)
    p_stats.add_argument("--mode", choices=["auto", "exact", "approx"],
                         default="auto")
    p_stats.add_argument("--out", default=None)
    p_stats.set_defaults(func=_cmd_stats)

    p_diag = sub.add_parser("diagnose",
                            help="audit optimizer controls, no benchmarks")
    p_diag.add_argument("--out", required=True)
    p_diag.add_argument("--budget", type=int, default=500)
    p_diag.add_argument("--samples", type=int, default=1_000_000)
    p_diag.add_argument("--envelope-samples", type=int, default=1000)
    p_diag.add_argument("--rule", choices=["1", "2", "3", "4", "all"],
                        default="all")
    p_diag.add_argument("--domain", default="-5:10",
                        help="probe box as LO:HI (default -5:10)")
    p_diag.add_argument("--resolution", type=float, default=0.01)
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.add_argument("--probe-gamma", type=float, default=None,
                        help="override the drift coefficient used by the "
                             "rule-4 probe")
    p_diag.set_defaults(func=_cmd_diagnose)

    p_report = sub.add_parser("report",
                              help="render markdown/CSV/figure report")
    p_report.add_argument("--input", required=True)
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--reference", default="eto")
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (IncompleteBlocksError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
