"""Render experiment results into a markdown report with tables,
per-function convergence-band CSVs, and figures.

Every suite gets the same three blocks: the omnibus rank test, the
average-rank table with quartile tags, and the pairwise comparisons
against the reference algorithm. Band CSVs use one row per iteration
(row i is iteration i+1) and exactly the five columns
``min,q1,median,q3,max``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import os

from .harness import ExperimentResult, convergence_bands, to_block_matrix
from .plotting import plot_convergence, plot_rank_bars
from .stats import ComparisonReport, compare_all, format_p


@dataclass
class ReportArtifacts:
    markdown_path: str
    band_csvs: list = field(default_factory=list)
    figures: list = field(default_factory=list)
    comparisons: dict = field(default_factory=dict)


def _friedman_block(comparison: ComparisonReport) -> list[str]:
    fr = comparison.friedman
    lines = [
        "### Rank test",
        "",
        "| blocks (N) | algorithms (k) | chi-square | df | p | Kendall's W |",
        "|---:|---:|---:|---:|---:|---:|",
        f"| {fr.n_blocks} | {len(fr.algorithms)} | {fr.chi2:.3f} "
        f"| {fr.df} | {format_p(fr.p_value)} | {fr.kendalls_w:.3f} |",
    ]
    if abs(fr.chi2 - fr.chi2_uncorrected) > 1e-12 * max(1.0, abs(fr.chi2)):
        lines += [
            "",
            f"Tied fitness values occurred; the statistic above is "
            f"tie-corrected (uncorrected: {fr.chi2_uncorrected:.3f}).",
        ]
    return lines


def _ranks_block(comparison: ComparisonReport) -> list[str]:
    fr = comparison.friedman
    lines = [
        "### Average ranks",
        "",
        "| algorithm | avg rank | quartile |",
        "|---|---:|:--|",
    ]
    for name, rank, tag in zip(fr.algorithms, fr.avg_ranks, fr.quartile_tags):
        marker = " (reference)" if name == comparison.reference else ""
        lines.append(f"| {name}{marker} | {rank:.3f} | Q{tag} |")
    return lines


def _pairwise_block(comparison: ComparisonReport) -> list[str]:
    lines = [
        f"### Pairwise vs {comparison.reference}",
        "",
        "| algorithm | W+ | z | p | p (adjusted) | effect r | Cliff's delta "
        "| median diff | note |",
        "|---|---:|---:|---:|---:|---:|---:|---:|:--|",
    ]
    for row in comparison.rows:
        if row.note:
            lines.append(
                f"| {row.group2} | - | - | - | - | - "
                f"| {row.cliffs_delta:.3f} | {row.median_diff:.4g} "
                f"| {row.note} |"
            )
        else:
            lines.append(
                f"| {row.group2} | {row.statistic:.1f} | {row.z:.3f} "
                f"| {format_p(row.p_raw)} | {format_p(row.p_adjusted)} "
                f"| {row.effect_r:.3f} | {row.cliffs_delta:.3f} "
                f"| {row.median_diff:.4g} | |"
            )
    lines += [
        "",
        "p-values are adjusted for the family of "
        f"{len(comparison.rows)} comparisons. Negative Cliff's delta and "
        "median diff favor the reference.",
    ]
    return lines


def write_comparison_csv(comparison: ComparisonReport, path) -> None:
    """Machine-readable counterpart of the pairwise block."""
    with open(path, "w", newline="") as fh:
        fh.write("group1,group2,statistic,z,p_raw,p_adjusted,effect_r,"
                 "cliffs_delta,median_diff,note\n")
        for row in comparison.rows:
            fh.write(
                f"{row.group1},{row.group2},{row.statistic!r},{row.z!r},"
                f"{row.p_raw!r},{row.p_adjusted!r},{row.effect_r!r},"
                f"{row.cliffs_delta!r},{row.median_diff!r},{row.note}\n"
            )


def render_report(result: ExperimentResult, out_dir, reference: str = "eto",
                  wilcoxon_mode: str = "auto",
                  include_figures: bool = True) -> ReportArtifacts:
    """Write ``report.md`` plus band CSVs and figures under ``out_dir``."""
    if reference not in result.algorithms:
        raise ValueError(
            f"reference {reference!r} not among algorithms {result.algorithms}"
        )
    os.makedirs(out_dir, exist_ok=True)
    artifacts = ReportArtifacts(markdown_path=os.path.join(out_dir, "report.md"))

    lines = [
        "# Benchmark report",
        "",
        f"{len(result.algorithms)} algorithms, "
        f"{sum(len(s.functions) for s in result.suites)} functions across "
        f"{len(result.suites)} suite(s), {result.n_runs} runs each. "
        f"Reference algorithm: {reference}.",
    ]
    if result.failures:
        lines += [
            "",
            f"**Warning: {len(result.failures)} run(s) failed and are "
            "missing from the analysis below.**",
        ]

    for suite in result.suites:
        matrix = to_block_matrix(result, suite)
        comparison = compare_all(matrix, reference, wilcoxon_mode=wilcoxon_mode)
        artifacts.comparisons[suite.name] = comparison

        lines += ["", f"## Suite: {suite.name}", "",
                  f"dim {suite.dim}, bounds "
                  f"[{suite.space.lower:g}, {suite.space.upper:g}], "
                  f"{len(suite.functions)} functions."]
        lines += [""] + _friedman_block(comparison)
        lines += [""] + _ranks_block(comparison)
        lines += [""] + _pairwise_block(comparison)

        bands_dir = os.path.join(out_dir, "bands", suite.name)
        os.makedirs(bands_dir, exist_ok=True)
        figures_dir = os.path.join(out_dir, "figures", suite.name)
        if include_figures:
            os.makedirs(figures_dir, exist_ok=True)

        for objective in suite.functions:
            per_algorithm = {}
            for alg in result.algorithms:
                curves = [
                    result.curves[(alg, objective.name, suite.dim, run)]
                    for run in range(result.n_runs)
                    if (alg, objective.name, suite.dim, run) in result.curves
                ]
                if len(curves) < 4:
                    continue
                bands = convergence_bands(curves)
                csv_path = os.path.join(
                    bands_dir, f"{objective.name}__{alg}.csv")
                bands.to_csv(csv_path)
                artifacts.band_csvs.append(csv_path)
                per_algorithm[alg] = bands
            if include_figures and per_algorithm:
                fig_path = plot_convergence(
                    per_algorithm,
                    title=f"{suite.name} / {objective.name}",
                    path=os.path.join(figures_dir, f"{objective.name}.png"),
                )
                artifacts.figures.append(fig_path)

        if include_figures:
            fig_path = plot_rank_bars(
                comparison.friedman.avg_ranks,
                comparison.friedman.algorithms,
                os.path.join(figures_dir, "ranks.png"),
                quartile_tags=comparison.friedman.quartile_tags,
                title=f"{suite.name}: average ranks",
            )
            artifacts.figures.append(fig_path)

    with open(artifacts.markdown_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return artifacts
