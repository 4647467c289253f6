"""Forensics lab for an exponential-trigonometric optimizer.

Three layers: a faithful implementation of the optimizer with every
control coefficient observable, a diagnostics suite that measures the
structural behavior of those controls, and a benchmarking harness with
rank-based nonparametric statistics for comparing it against baselines.
"""

from .core import (
    BoundaryPolicy,
    Optimizer,
    OptimizerError,
    Population,
    RunRecord,
    SearchSpace,
    apply_boundary,
    evaluate,
    init_population,
    run_optimizer,
)
from .eto import (
    CSV_COLUMNS,
    DRAW_TABLE,
    GAMMA_AS_PRINTED,
    GAMMA_TEXT_CLAIMED,
    ControlTrace,
    EtoOptimizer,
    EtoParams,
    EtoTraceEntry,
    TriggerSchedule,
    coeff_alpha1,
    coeff_alpha2,
    coeff_alpha3,
    coeff_gamma,
    contracted_bounds,
    eto_step,
    mode_coefficient,
    mode_switch_probability,
    oscillation_pair,
    phase_boundary,
    trigger_schedule,
    update_rule_1,
    update_rule_2,
    update_rule_3,
    update_rule_4,
)
from .baselines import ParticleSwarm, RandomSearch
from .benchmarks import (
    BASE_FUNCTIONS,
    BASE_NAMES,
    SUITE_KINDS,
    ObjectiveSpec,
    SuiteSpec,
    build_suite,
    evaluate_objective,
    load_suite,
    random_orthogonal,
    save_suite,
    suite_from_manifest,
    suite_to_manifest,
)
from .diagnostics import (
    BiasMetrics,
    BudgetReport,
    ControlEnvelopes,
    EmpiricalPdf,
    Finding,
    FlawReport,
    audit_schedule,
    constancy_check,
    full_flaw_report,
    pdf_to_csv,
    probe_update_distribution,
    stochastic_budget_report,
    switch_probability_curve,
    trace_controls,
)
from .stats import (
    BlockMatrix,
    ComparisonReport,
    FriedmanReport,
    IncompleteBlocksError,
    PairwiseRow,
    WilcoxonRefusal,
    WilcoxonResult,
    chi_square_upper_tail,
    cliffs_delta,
    compare_all,
    dunn_sidak_adjust,
    effect_size_r,
    format_p,
    friedman_test,
    median_difference,
    quartile_tags,
    wilcoxon_signed_rank,
)
from .harness import (
    AlgorithmSpec,
    ConfigError,
    ConvergenceBands,
    ExperimentConfig,
    ExperimentResult,
    OPTIMIZER_REGISTRY,
    ResultRow,
    build_optimizer,
    convergence_bands,
    derive_run_seed,
    load_config,
    load_results,
    register_optimizer,
    run_experiment,
    to_block_matrix,
)
from .report import ReportArtifacts, render_report, write_comparison_csv

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
