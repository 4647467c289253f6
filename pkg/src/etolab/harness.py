"""Experiment orchestration: config, execution, persistence, aggregation.

An experiment is a full cross of algorithms x suite functions x
repeated runs. Each run's seed is a pure function of the master seed
and the (algorithm, function, run) indices, so any single run can be
replayed from its CSV row and adding an algorithm or function at the
end never perturbs existing streams.

Persistence is incremental and append-only: the curve record is written
first, then the results row as the commit marker, so an interrupted
experiment resumes by skipping exactly the committed runs and the final
artifacts match an uninterrupted execution byte for byte. Wall-clock
times go to a separate file because they are the one thing that cannot
be deterministic.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import json
import os
import time

import numpy as np

from .baselines import ParticleSwarm, RandomSearch
from .benchmarks import (
    SuiteSpec,
    build_suite,
    load_suite,
    suite_from_manifest,
    suite_to_manifest,
)
from .core import BoundaryPolicy, Optimizer, run_optimizer
from .eto import EtoOptimizer
from .stats import BlockMatrix, IncompleteBlocksError

RESULTS_HEADER = ("algorithm", "function", "dim", "run", "seed", "final_fitness")

OPTIMIZER_REGISTRY: dict = {
    "eto": EtoOptimizer,
    "pso": ParticleSwarm,
    "random-search": RandomSearch,
}


def register_optimizer(name: str, factory, overwrite: bool = False) -> None:
    """Add an optimizer factory to the registry (the plug-in hook)."""
    if name in OPTIMIZER_REGISTRY and not overwrite:
        raise ValueError(f"optimizer {name!r} already registered")
    OPTIMIZER_REGISTRY[name] = factory


def build_optimizer(name: str, params: dict | None = None) -> Optimizer:
    if name not in OPTIMIZER_REGISTRY:
        raise ValueError(f"unknown optimizer: {name!r}")
    return OPTIMIZER_REGISTRY[name](**(params or {}))


class ConfigError(ValueError):
    """All validation failures of a config, reported together."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid config:\n  - " + "\n  - ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description.

    ``budget`` applies uniformly unless a suite appears in
    ``suite_budgets``. Algorithm order is load-bearing: it fixes seed
    indices and all report column orders.
    """

    suites: list[SuiteSpec]
    algorithms: list[AlgorithmSpec]
    n_runs: int = 25
    n_agents: int = 30
    budget: int = 500
    master_seed: int = 0
    boundary: BoundaryPolicy = BoundaryPolicy.CLAMP
    suite_budgets: dict = field(default_factory=dict)

    def suite_budget(self, suite_name: str) -> int:
        return self.suite_budgets.get(suite_name, self.budget)


_TOP_LEVEL_KEYS = {"master_seed", "n_runs", "n_agents", "budget", "boundary",
                   "algorithms", "suites"}
_SUITE_KEYS = {"name", "kind", "n_functions", "dim", "lower", "upper",
               "seed", "budget", "manifest"}
_ALGO_KEYS = {"name", "params"}


def _check_positive_int(raw: dict, key: str, default: int,
                        errors: list[str]) -> int:
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        errors.append(f"{key} must be a positive integer, got {value!r}")
        return default
    return value


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config, enumerating every error.

    All problems are collected into one :class:`ConfigError` so a bad
    config is fixed in one pass rather than whack-a-mole. Suite
    ``manifest`` paths resolve relative to the config file.
    """
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])

    errors: list[str] = []
    for key in raw:
        if key not in _TOP_LEVEL_KEYS:
            errors.append(f"unknown top-level key: {key!r}")

    n_runs = _check_positive_int(raw, "n_runs", 25, errors)
    n_agents = _check_positive_int(raw, "n_agents", 30, errors)
    budget = _check_positive_int(raw, "budget", 500, errors)
    master_seed = raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or isinstance(master_seed, bool):
        errors.append(f"master_seed must be an integer, got {master_seed!r}")
        master_seed = 0

    boundary_raw = raw.get("boundary", "clamp")
    boundary = BoundaryPolicy.CLAMP
    try:
        boundary = BoundaryPolicy(boundary_raw)
    except ValueError:
        errors.append(
            f"boundary must be one of "
            f"{[p.value for p in BoundaryPolicy]}, got {boundary_raw!r}"
        )

    algorithms: list[AlgorithmSpec] = []
    raw_algorithms = raw.get("algorithms")
    if not isinstance(raw_algorithms, list) or not raw_algorithms:
        errors.append("algorithms must be a non-empty list")
    else:
        seen = set()
        for i, entry in enumerate(raw_algorithms):
            if not isinstance(entry, dict) or "name" not in entry:
                errors.append(f"algorithms[{i}] must be an object with a 'name'")
                continue
            for key in entry:
                if key not in _ALGO_KEYS:
                    errors.append(f"algorithms[{i}]: unknown key {key!r}")
            name = entry["name"]
            params = entry.get("params", {})
            if not isinstance(params, dict):
                errors.append(f"algorithms[{i}] ({name}): params must be an object")
                params = {}
            if name in seen:
                errors.append(f"duplicate algorithm name: {name!r}")
            seen.add(name)
            if name not in OPTIMIZER_REGISTRY:
                errors.append(
                    f"unknown algorithm {name!r}; registered: "
                    f"{sorted(OPTIMIZER_REGISTRY)}"
                )
            algorithms.append(AlgorithmSpec(name=name, params=params))

    suites: list[SuiteSpec] = []
    suite_budgets: dict = {}
    raw_suites = raw.get("suites")
    config_dir = os.path.dirname(os.path.abspath(path))
    if not isinstance(raw_suites, list) or not raw_suites:
        errors.append("suites must be a non-empty list")
    else:
        seen_names = set()
        for i, entry in enumerate(raw_suites):
            if not isinstance(entry, dict):
                errors.append(f"suites[{i}] must be an object")
                continue
            for key in entry:
                if key not in _SUITE_KEYS:
                    errors.append(f"suites[{i}]: unknown key {key!r}")
            try:
                if "manifest" in entry:
                    manifest_path = entry["manifest"]
                    if not os.path.isabs(manifest_path):
                        manifest_path = os.path.join(config_dir, manifest_path)
                    suite = load_suite(manifest_path)
                else:
                    suite = build_suite(
                        kind=entry.get("kind", "basic"),
                        n_functions=entry.get("n_functions", 10),
                        dim=entry.get("dim", 10),
                        seed=entry.get("seed", 0),
                        lower=entry.get("lower", -100.0),
                        upper=entry.get("upper", 100.0),
                        name=entry.get("name"),
                    )
            except (ValueError, OSError, KeyError) as exc:
                errors.append(f"suites[{i}]: {exc}")
                continue
            if suite.name in seen_names:
                errors.append(f"duplicate suite name: {suite.name!r}")
            seen_names.add(suite.name)
            if "budget" in entry:
                override = entry["budget"]
                if not isinstance(override, int) or isinstance(override, bool) \
                        or override < 1:
                    errors.append(
                        f"suites[{i}] ({suite.name}): budget override must be "
                        f"a positive integer, got {override!r}"
                    )
                else:
                    suite_budgets[suite.name] = override
            suites.append(suite)

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        suites=suites, algorithms=algorithms, n_runs=n_runs,
        n_agents=n_agents, budget=budget, master_seed=master_seed,
        boundary=boundary, suite_budgets=suite_budgets,
    )


def derive_run_seed(master_seed: int, alg_idx: int, func_idx: int,
                    run_idx: int) -> int:
    """Collision-free 64-bit seed for one run.

    The three indices pack into disjoint bit fields (run: 0-23,
    function: 24-43, algorithm: 44-63) and XOR against the master seed;
    XOR with a constant is a bijection, so distinct triples always get
    distinct seeds, and appending algorithms or functions leaves
    existing seeds untouched.
    """
    if not 0 <= alg_idx < (1 << 20):
        raise ValueError(f"alg_idx out of range: {alg_idx}")
    if not 0 <= func_idx < (1 << 20):
        raise ValueError(f"func_idx out of range: {func_idx}")
    if not 0 <= run_idx < (1 << 24):
        raise ValueError(f"run_idx out of range: {run_idx}")
    packed = (alg_idx << 44) | (func_idx << 24) | run_idx
    return (int(master_seed) ^ packed) & ((1 << 64) - 1)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    function: str
    dim: int
    run: int
    seed: int
    final_fitness: float


@dataclass
class ExperimentResult:
    """Everything an experiment produced, as loaded from its directory."""

    rows: list[ResultRow]
    curves: dict
    failures: list[dict]
    algorithms: tuple[str, ...]
    suites: list[SuiteSpec]
    n_runs: int
    budget: int
    suite_budgets: dict = field(default_factory=dict)

    def final_map(self) -> dict:
        return {(r.algorithm, r.function, r.dim, r.run): r.final_fitness
                for r in self.rows}


@dataclass(frozen=True)
class _Task:
    alg_idx: int
    alg: AlgorithmSpec
    func_idx: int
    suite_name: str
    objective: object
    dim: int
    budget: int
    run_idx: int
    seed: int


def _execute_task(payload):
    task, n_agents, boundary, space = payload
    optimizer = build_optimizer(task.alg.name, task.alg.params)
    started = time.perf_counter()
    record = run_optimizer(
        optimizer, task.objective, space, n_agents, task.budget,
        task.seed, boundary,
    )
    return record, time.perf_counter() - started


def _format_row(task: _Task, final_fitness: float) -> str:
    return (f"{task.alg.name},{task.objective.name},{task.dim},"
            f"{task.run_idx},{task.seed},{final_fitness!r}\n")


def _curve_line(task: _Task, curve: np.ndarray) -> str:
    payload = {
        "algorithm": task.alg.name,
        "function": task.objective.name,
        "dim": task.dim,
        "run": task.run_idx,
        "seed": task.seed,
        "curve": [float(v) for v in curve],
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def _read_done_keys(results_path) -> set:
    done = set()
    if not os.path.exists(results_path):
        return done
    with open(results_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            done.add((row["algorithm"], row["function"],
                      int(row["dim"]), int(row["run"])))
    return done


def run_experiment(config: ExperimentConfig, out_dir,
                   workers: int = 1) -> ExperimentResult:
    """Execute (or finish) the full run matrix into ``out_dir``.

    Runs already committed to ``results.csv`` are skipped, so rerunning
    over a completed directory recomputes nothing and an interrupted
    experiment picks up where it stopped. With ``workers > 1`` runs
    execute in a process pool, but rows are still committed in canonical
    (algorithm, function, run) order, so the output bytes do not depend
    on scheduling. A failed run is recorded with its reason and leaves a
    gap; the experiment continues.
    """
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    curves_path = os.path.join(out_dir, "curves.jsonl")
    timings_path = os.path.join(out_dir, "timings.jsonl")
    failures_path = os.path.join(out_dir, "failures.jsonl")

    with open(os.path.join(out_dir, "suites.json"), "w") as fh:
        json.dump({"suites": [suite_to_manifest(s) for s in config.suites]},
                  fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump({
            "master_seed": config.master_seed,
            "n_runs": config.n_runs,
            "n_agents": config.n_agents,
            "budget": config.budget,
            "boundary": config.boundary.value,
            "algorithms": [{"name": a.name, "params": a.params}
                           for a in config.algorithms],
            "suite_budgets": config.suite_budgets,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")

    flat_functions = []
    for suite in config.suites:
        for objective in suite.functions:
            flat_functions.append((suite, objective))

    tasks: list[_Task] = []
    for alg_idx, alg in enumerate(config.algorithms):
        for func_idx, (suite, objective) in enumerate(flat_functions):
            for run_idx in range(config.n_runs):
                tasks.append(_Task(
                    alg_idx=alg_idx, alg=alg, func_idx=func_idx,
                    suite_name=suite.name, objective=objective,
                    dim=suite.dim,
                    budget=config.suite_budget(suite.name),
                    run_idx=run_idx,
                    seed=derive_run_seed(config.master_seed, alg_idx,
                                         func_idx, run_idx),
                ))

    done = _read_done_keys(results_path)
    pending = [t for t in tasks
               if (t.alg.name, t.objective.name, t.dim, t.run_idx) not in done]
    spaces = {s.name: s.space for s in config.suites}

    write_header = not os.path.exists(results_path)
    failures: list[dict] = []
    if pending:
        results_fh = open(results_path, "a", newline="")
        curves_fh = open(curves_path, "a")
        timings_fh = open(timings_path, "a")
        if write_header:
            results_fh.write(",".join(RESULTS_HEADER) + "\n")
            results_fh.flush()

        def commit(task: _Task, outcome, error: str | None):
            if error is not None:
                failure = {
                    "algorithm": task.alg.name,
                    "function": task.objective.name,
                    "dim": task.dim,
                    "run": task.run_idx,
                    "seed": task.seed,
                    "reason": error,
                }
                failures.append(failure)
                with open(failures_path, "a") as ffh:
                    ffh.write(json.dumps(failure, separators=(",", ":")) + "\n")
                return
            record, wall = outcome
            curves_fh.write(_curve_line(task, record.curve))
            curves_fh.flush()
            results_fh.write(_format_row(task, record.final_fitness))
            results_fh.flush()
            timings_fh.write(json.dumps({
                "algorithm": task.alg.name, "function": task.objective.name,
                "dim": task.dim, "run": task.run_idx, "seconds": wall,
            }, separators=(",", ":")) + "\n")

        try:
            if workers <= 1:
                for task in pending:
                    try:
                        outcome = _execute_task(
                            (task, config.n_agents, config.boundary,
                             spaces[task.suite_name]))
                        commit(task, outcome, None)
                    except Exception as exc:  # noqa: BLE001 - recorded, run continues
                        commit(task, None, f"{type(exc).__name__}: {exc}")
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    futures = [
                        pool.submit(_execute_task,
                                    (task, config.n_agents, config.boundary,
                                     spaces[task.suite_name]))
                        for task in pending
                    ]
                    # commit in submission order regardless of completion order
                    for task, future in zip(pending, futures):
                        try:
                            commit(task, future.result(), None)
                        except Exception as exc:  # noqa: BLE001
                            commit(task, None, f"{type(exc).__name__}: {exc}")
        finally:
            results_fh.close()
            curves_fh.close()
            timings_fh.close()

    return load_results(out_dir)


def load_results(out_dir) -> ExperimentResult:
    """Load a results directory back into memory (curves deduped keep-last)."""
    with open(os.path.join(out_dir, "config.json")) as fh:
        config_raw = json.load(fh)
    with open(os.path.join(out_dir, "suites.json")) as fh:
        suites = [suite_from_manifest(m) for m in json.load(fh)["suites"]]

    rows: list[ResultRow] = []
    results_path = os.path.join(out_dir, "results.csv")
    if os.path.exists(results_path):
        with open(results_path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is not None \
                    and tuple(reader.fieldnames) != RESULTS_HEADER:
                raise ValueError(
                    f"unexpected results header: {reader.fieldnames}"
                )
            for row in reader:
                rows.append(ResultRow(
                    algorithm=row["algorithm"], function=row["function"],
                    dim=int(row["dim"]), run=int(row["run"]),
                    seed=int(row["seed"]),
                    final_fitness=float(row["final_fitness"]),
                ))

    curves: dict = {}
    curves_path = os.path.join(out_dir, "curves.jsonl")
    if os.path.exists(curves_path):
        with open(curves_path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                payload = json.loads(line)
                key = (payload["algorithm"], payload["function"],
                       payload["dim"], payload["run"])
                curves[key] = np.asarray(payload["curve"], dtype=float)

    failures: list[dict] = []
    failures_path = os.path.join(out_dir, "failures.jsonl")
    if os.path.exists(failures_path):
        with open(failures_path) as fh:
            failures = [json.loads(line) for line in fh if line.strip()]

    return ExperimentResult(
        rows=rows,
        curves=curves,
        failures=failures,
        algorithms=tuple(a["name"] for a in config_raw["algorithms"]),
        suites=suites,
        n_runs=config_raw["n_runs"],
        budget=config_raw["budget"],
        suite_budgets=config_raw.get("suite_budgets", {}),
    )


@dataclass(frozen=True)
class ConvergenceBands:
    """Per-iteration spread of best-so-far curves across runs."""

    minimum: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray
    maximum: np.ndarray

    def to_csv(self, path) -> None:
        """Five numeric columns, one row per iteration (row i = iteration i+1)."""
        with open(path, "w", newline="") as fh:
            fh.write("min,q1,median,q3,max\n")
            for values in zip(self.minimum, self.q1, self.median,
                              self.q3, self.maximum):
                fh.write(",".join(repr(float(v)) for v in values) + "\n")


def convergence_bands(curves) -> ConvergenceBands:
    """Quartile bands (midpoint interpolation) over aligned run curves."""
    matrix = np.asarray(curves, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("curves must stack into a 2-d array (runs x iterations)")
    if matrix.shape[0] < 4:
        raise ValueError(
            f"need at least 4 runs for quartile bands, got {matrix.shape[0]}"
        )
    q1, median, q3 = np.percentile(matrix, [25, 50, 75], axis=0,
                                   method="midpoint")
    return ConvergenceBands(
        minimum=matrix.min(axis=0), q1=q1, median=median, q3=q3,
        maximum=matrix.max(axis=0),
    )


def to_block_matrix(result: ExperimentResult,
                    suite: SuiteSpec | None = None,
                    algorithms=None) -> BlockMatrix:
    """Assemble the (function x run) blocks-by-algorithms fitness matrix.

    Columns follow the experiment's declared algorithm order; blocks
    follow suite function order crossed with run index. Any missing
    (block, algorithm) cell aborts with the gaps named, because a rank
    test over silently dropped rows would be misleading.
    """
    names = tuple(algorithms) if algorithms is not None else result.algorithms
    if suite is not None:
        functions = [(f.name, suite.dim) for f in suite.functions]
    else:
        functions = [(f.name, s.dim) for s in result.suites for f in s.functions]
    final = result.final_map()
    block_ids = []
    rows = []
    gaps = []
    for fname, dim in functions:
        for run in range(result.n_runs):
            block_ids.append(f"{fname}:run{run}")
            row = []
            for alg in names:
                key = (alg, fname, dim, run)
                if key in final:
                    row.append(final[key])
                else:
                    gaps.append(f"{alg}/{fname}/dim{dim}/run{run}")
            rows.append(row)
    if gaps:
        shown = ", ".join(gaps[:10]) + ("..." if len(gaps) > 10 else "")
        raise IncompleteBlocksError(
            f"{len(gaps)} missing result cells: {shown}"
        )
    return BlockMatrix(
        values=np.asarray(rows, dtype=float),
        algorithms=names,
        block_ids=tuple(block_ids),
    )
