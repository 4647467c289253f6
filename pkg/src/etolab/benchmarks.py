"""Benchmark objectives: ten classic bases plus shift/rotation transforms.

Every base has its global minimum of exactly 0 at the zero vector, so a
transformed objective ``f(x) = base(Q (x - s)) + bias`` has its optimum
at the shift ``s`` with value ``bias``. Bases whose textbook form puts
the optimum elsewhere (rosenbrock, levy) are re-centered so the whole
family shares the convention.

All bases evaluate along the last axis, so a single point of shape
``(dim,)`` and a batch of shape ``(n, dim)`` both work.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .core import SearchSpace


def _sphere(x):
    return np.sum(x * x, axis=-1)


def _elliptic(x):
    d = x.shape[-1]
    if d == 1:
        return np.sum(x * x, axis=-1)
    coeff = 10.0 ** (6.0 * np.arange(d) / (d - 1))
    return np.sum(coeff * x * x, axis=-1)


def _bent_cigar(x):
    head = x[..., 0] ** 2
    if x.shape[-1] == 1:
        return head
    return head + 1e6 * np.sum(x[..., 1:] ** 2, axis=-1)


def _rastrigin(x):
    return np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x) + 10.0, axis=-1)


def _rosenbrock(x):
    # re-centered: optimum moved from the all-ones point to the origin
    y = x + 1.0
    a = y[..., 1:]
    b = y[..., :-1]
    return np.sum(100.0 * (a - b * b) ** 2 + (b - 1.0) ** 2, axis=-1)


def _ackley(x):
    d = x.shape[-1]
    quad = np.sqrt(np.sum(x * x, axis=-1) / d)
    wave = np.sum(np.cos(2.0 * np.pi * x), axis=-1) / d
    return -20.0 * np.exp(-0.2 * quad) - np.exp(wave) + 20.0 + math.e


def _griewank(x):
    d = x.shape[-1]
    denom = np.sqrt(np.arange(1, d + 1, dtype=float))
    return (np.sum(x * x, axis=-1) / 4000.0
            - np.prod(np.cos(x / denom), axis=-1) + 1.0)


def _schwefel_1_2(x):
    partial = np.cumsum(x, axis=-1)
    return np.sum(partial * partial, axis=-1)


def _zakharov(x):
    d = x.shape[-1]
    weights = 0.5 * np.arange(1, d + 1, dtype=float)
    s1 = np.sum(x * x, axis=-1)
    s2 = np.sum(weights * x, axis=-1)
    return s1 + s2 ** 2 + s2 ** 4


def _levy(x):
    # re-centered: w = 1 + x/4 puts the optimum at the origin
    w = 1.0 + x / 4.0
    head = np.sin(np.pi * w[..., 0]) ** 2
    mid = w[..., :-1]
    body = np.sum((mid - 1.0) ** 2
                  * (1.0 + 10.0 * np.sin(np.pi * mid + 1.0) ** 2), axis=-1)
    last = w[..., -1]
    tail = (last - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * last) ** 2)
    return head + body + tail


BASE_FUNCTIONS = {
    "sphere": _sphere,
    "elliptic": _elliptic,
    "bent_cigar": _bent_cigar,
    "rastrigin": _rastrigin,
    "rosenbrock": _rosenbrock,
    "ackley": _ackley,
    "griewank": _griewank,
    "schwefel_1_2": _schwefel_1_2,
    "zakharov": _zakharov,
    "levy": _levy,
}

BASE_NAMES = tuple(BASE_FUNCTIONS)

SUITE_KINDS = ("basic", "shifted", "shift_rotated")


def random_orthogonal(dim: int, seed: int) -> np.ndarray:
    """Deterministic Haar-style random orthogonal matrix.

    Orthonormalizes a standard-normal matrix and fixes the sign
    ambiguity by making the triangular factor's diagonal positive, so
    the result is a pure function of (dim, seed).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    signs = np.where(np.diag(r) >= 0.0, 1.0, -1.0)
    return q * signs


@dataclass
class ObjectiveSpec:
    """One benchmark function: base plus optional shift/rotation/bias.

    Evaluation order is ``base(rotation @ (x - shift)) + bias``. The
    rotation matrix is carried explicitly for evaluation and by
    ``rotation_seed`` for replay through manifests.
    """

    name: str
    base: str
    dim: int
    shift: np.ndarray | None = None
    rotation: np.ndarray | None = None
    rotation_seed: int | None = None
    bias: float = 0.0

    def __post_init__(self):
        if self.base not in BASE_FUNCTIONS:
            raise ValueError(f"unknown base function: {self.base!r}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.shift is not None:
            self.shift = np.asarray(self.shift, dtype=float)
            if self.shift.shape != (self.dim,):
                raise ValueError("shift must have shape (dim,)")
        if self.rotation is not None:
            self.rotation = np.asarray(self.rotation, dtype=float)
            if self.rotation.shape != (self.dim, self.dim):
                raise ValueError("rotation must have shape (dim, dim)")

    def _transform(self, x: np.ndarray) -> np.ndarray:
        z = x
        if self.shift is not None:
            z = z - self.shift
        if self.rotation is not None:
            z = z @ self.rotation.T
        return z

    def evaluate_batch(self, positions: np.ndarray) -> np.ndarray:
        """Evaluate a (n, dim) batch; returns (n,) values."""
        positions = np.asarray(positions, dtype=float)
        if positions.shape[-1] != self.dim:
            raise ValueError(
                f"{self.name}: expected trailing dimension {self.dim}, "
                f"got {positions.shape[-1]}"
            )
        z = self._transform(positions)
        return BASE_FUNCTIONS[self.base](z) + self.bias

    def __call__(self, x: np.ndarray) -> float:
        return float(self.evaluate_batch(np.asarray(x, dtype=float)))


def evaluate_objective(spec: ObjectiveSpec, x: np.ndarray) -> float:
    """Evaluate one point (batch callers invoke the objective directly)."""
    return spec(x)


@dataclass
class SuiteSpec:
    """A named, ordered collection of objectives over one search space."""

    name: str
    kind: str
    dim: int
    space: SearchSpace
    seed: int
    functions: list[ObjectiveSpec] = field(default_factory=list)
    notes: str = ""


def build_suite(kind: str, n_functions: int, dim: int, seed: int,
                lower: float = -100.0, upper: float = 100.0,
                name: str | None = None) -> SuiteSpec:
    """Construct a suite of ``n_functions`` objectives deterministically.

    Bases are cycled in declared order; when ``n_functions`` exceeds the
    ten bases (the 29-function layout), later cycles are fresh variants
    with their own shift and rotation seeds. ``basic`` suites carry no
    transforms, so they cap at ten distinct functions. Shifts are drawn
    uniformly from the central 80% of the interval. The same arguments
    always produce bitwise-identical suites.
    """
    if kind not in SUITE_KINDS:
        raise ValueError(f"unknown suite kind: {kind!r} (choose from {SUITE_KINDS})")
    if n_functions < 1:
        raise ValueError(f"n_functions must be >= 1, got {n_functions}")
    if kind == "basic" and n_functions > len(BASE_NAMES):
        raise ValueError(
            f"basic suites have no transforms, so at most {len(BASE_NAMES)} "
            f"distinct functions are available (asked for {n_functions})"
        )
    space = SearchSpace(dim=dim, lower=lower, upper=upper)
    if name is None:
        name = f"{kind}-{dim}d"
    margin = 0.1 * space.length
    functions = []
    for i in range(n_functions):
        base = BASE_NAMES[i % len(BASE_NAMES)]
        fname = f"f{i + 1:02d}_{base}"
        shift = None
        rotation = None
        rotation_seed = None
        if kind in ("shifted", "shift_rotated"):
            frng = np.random.default_rng([seed, i])
            shift = (frng.random(dim) * (space.length - 2.0 * margin)
                     + space.lower + margin)
        if kind == "shift_rotated":
            rotation_seed = seed * 100003 + i
            rotation = random_orthogonal(dim, rotation_seed)
        functions.append(ObjectiveSpec(
            name=fname, base=base, dim=dim, shift=shift,
            rotation=rotation, rotation_seed=rotation_seed,
        ))
    notes = (f"{n_functions} functions over {len(BASE_NAMES)} bases; "
             f"counts of 10 and 29 mirror the two benchmark-block layouts")
    return SuiteSpec(name=name, kind=kind, dim=dim, space=space,
                     seed=seed, functions=functions, notes=notes)


def suite_to_manifest(suite: SuiteSpec) -> dict:
    """Plain-data manifest from which the suite is exactly replayable."""
    return {
        "name": suite.name,
        "kind": suite.kind,
        "dim": suite.dim,
        "lower": suite.space.lower,
        "upper": suite.space.upper,
        "seed": suite.seed,
        "notes": suite.notes,
        "functions": [
            {
                "name": f.name,
                "base": f.base,
                "dim": f.dim,
                "shift": None if f.shift is None else f.shift.tolist(),
                "rotation_seed": f.rotation_seed,
                "bias": f.bias,
            }
            for f in suite.functions
        ],
    }


def suite_from_manifest(manifest: dict) -> SuiteSpec:
    """Rebuild a suite from its manifest; rotations regenerate from their seeds."""
    functions = []
    for entry in manifest["functions"]:
        rotation_seed = entry.get("rotation_seed")
        rotation = None
        if rotation_seed is not None:
            rotation = random_orthogonal(entry["dim"], rotation_seed)
        functions.append(ObjectiveSpec(
            name=entry["name"], base=entry["base"], dim=entry["dim"],
            shift=entry.get("shift"), rotation=rotation,
            rotation_seed=rotation_seed, bias=entry.get("bias", 0.0),
        ))
    return SuiteSpec(
        name=manifest["name"], kind=manifest["kind"], dim=manifest["dim"],
        space=SearchSpace(dim=manifest["dim"], lower=manifest["lower"],
                          upper=manifest["upper"]),
        seed=manifest["seed"], functions=functions,
        notes=manifest.get("notes", ""),
    )


def save_suite(suite: SuiteSpec, path) -> None:
    """Write the suite manifest as JSON (floats round-trip exactly)."""
    with open(path, "w") as fh:
        json.dump(suite_to_manifest(suite), fh, indent=2)
        fh.write("\n")


def load_suite(path) -> SuiteSpec:
    with open(path) as fh:
        return suite_from_manifest(json.load(fh))
