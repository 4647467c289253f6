"""Rank-based nonparametric comparison pipeline.

The pipeline follows the usual recipe for comparing k optimizers over N
independent blocks (one block per function/run pair): a tie-corrected
Friedman test with Kendall's W as the agreement effect size, then
pairwise Wilcoxon signed-rank tests against a reference algorithm with
Dunn-Sidak correction, the |z|/sqrt(n) effect size, Cliff's delta and
the raw median difference. Lower fitness is better everywhere, so rank
1 is best and negative delta / median difference mean the first sample
(the reference) is better.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata


class WilcoxonRefusal(ValueError):
    """Raised when the signed-rank test would be meaningless.

    Carries ``code`` ("UNDERPOWERED") and ``n_nonzero`` so callers can
    flag the comparison instead of failing.
    """

    def __init__(self, message: str, n_nonzero: int):
        super().__init__(message)
        self.code = "UNDERPOWERED"
        self.n_nonzero = n_nonzero


class IncompleteBlocksError(ValueError):
    """Raised when a block design has gaps; the message names them."""


@dataclass(frozen=True)
class BlockMatrix:
    """N blocks by k algorithms of final fitness values.

    Columns follow the experiment's declared algorithm order; every cell
    must be present and finite (missing runs are refused upstream with
    the gaps named).
    """

    values: np.ndarray
    algorithms: tuple[str, ...]
    block_ids: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array (blocks x algorithms)")
        n, k = values.shape
        if len(self.algorithms) != k:
            raise ValueError("algorithm names must match the column count")
        if len(self.block_ids) != n:
            raise ValueError("block ids must match the row count")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))
            names = [f"{self.block_ids[i]}/{self.algorithms[j]}"
                     for i, j in bad[:5]]
            raise IncompleteBlocksError(
                f"non-finite cells at {', '.join(names)}"
                + ("..." if len(bad) > 5 else "")
            )

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]

    @property
    def n_algorithms(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FriedmanReport:
    """Friedman test outcome plus the rank summary used for reporting.

    ``chi2`` is tie-corrected; the uncorrected value is kept so the
    size of the correction is visible. ``kendalls_w`` always equals
    ``chi2 / (N (k - 1))``.
    """

    n_blocks: int
    algorithms: tuple[str, ...]
    chi2: float
    chi2_uncorrected: float
    df: int
    p_value: float
    kendalls_w: float
    avg_ranks: np.ndarray
    quartile_tags: tuple[int, ...]


def chi_square_upper_tail(x: float, df: float) -> float:
    """Upper-tail probability of the chi-square distribution.

    The regularized upper incomplete gamma function Q(df/2, x/2).
    Underflows to exactly 0.0 for astronomically large statistics,
    which the report renders as "0.000".
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    return float(gammaincc(df / 2.0, x / 2.0))


def friedman_test(matrix: BlockMatrix) -> FriedmanReport:
    """Tie-corrected Friedman test over the block design.

    Ranks are assigned within each block, ascending (rank 1 = smallest
    fitness = best), with average ranks for ties. The correction divides
    the classic statistic by ``1 - sum(t^3 - t) / (N k (k^2 - 1))``;
    fully tied blocks across the board degenerate to a zero statistic
    with p = 1.
    """
    n, k = matrix.n_blocks, matrix.n_algorithms
    if n < 2:
        raise ValueError(f"need at least 2 blocks, got {n}")
    if k < 2:
        raise ValueError(f"need at least 2 algorithms, got {k}")
    ranks = np.vstack([rankdata(row, method="average")
                       for row in matrix.values])
    rank_sums = ranks.sum(axis=0)
    chi2_raw = (12.0 / (n * k * (k + 1))) * float(np.sum(rank_sums ** 2)) \
        - 3.0 * n * (k + 1)

    tie_term = 0.0
    for row in matrix.values:
        _, counts = np.unique(row, return_counts=True)
        tie_term += float(np.sum(counts ** 3 - counts))
    correction = 1.0 - tie_term / (n * k * (k * k - 1))
    if correction > 0.0:
        chi2 = chi2_raw / correction
    else:
        # every block fully tied: no evidence of any difference
        chi2 = 0.0
    chi2 = max(chi2, 0.0)
    df = k - 1
    avg_ranks = rank_sums / n
    return FriedmanReport(
        n_blocks=n,
        algorithms=matrix.algorithms,
        chi2=chi2,
        chi2_uncorrected=max(chi2_raw, 0.0),
        df=df,
        p_value=chi_square_upper_tail(chi2, df),
        kendalls_w=chi2 / (n * (k - 1)),
        avg_ranks=avg_ranks,
        quartile_tags=quartile_tags(avg_ranks),
    )


@dataclass(frozen=True)
class WilcoxonResult:
    """Signed-rank outcome: statistic is the positive-rank sum W+.

    ``z`` always comes from the tie-corrected normal approximation with
    a 0.5 continuity correction (signed by W+ minus its mean), so the
    effect size stays defined even when ``p_value`` is exact.
    """

    statistic: float
    z: float
    p_value: float
    n_nonzero: int
    used_exact: bool


def _exact_signed_rank_p(doubled_ranks: np.ndarray, w_plus_doubled: int) -> float:
    """Exact two-sided p over all sign assignments of the observed ranks.

    Subset-sum dynamic program over doubled ranks (integers even with
    average-tie ranks); identical to full 2^n enumeration. The
    distribution of W+ is symmetric about total/2, and the two-sided p
    is the probability of being at least as far from the center.
    """
    total = int(doubled_ranks.sum())
    ways = np.zeros(total + 1, dtype=float)
    ways[0] = 1.0
    for w in doubled_ranks:
        w = int(w)  # doubled ranks are >= 2, so the slice below is nonempty
        ways[w:] = ways[w:] + ways[:-w]
    n = len(doubled_ranks)
    center = total / 2.0
    distance = abs(w_plus_doubled - center)
    sums = np.arange(total + 1, dtype=float)
    tail = ways[np.abs(sums - center) >= distance - 1e-9].sum()
    return min(1.0, tail / (2.0 ** n))


def wilcoxon_signed_rank(a, b, mode: str = "auto") -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test of a vs b.

    Zero differences are dropped before ranking. With fewer than 5
    nonzero differences the test is refused (:class:`WilcoxonRefusal`)
    rather than reported at meaningless power. ``mode`` selects the
    p-value route: "exact" enumerates the conditional sign distribution
    (ties handled), "approx" uses the tie-corrected normal
    approximation with continuity correction, "auto" picks exact for
    n <= 20.
    """
    if mode not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown mode: {mode!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-d arrays of equal length")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n < 5:
        raise WilcoxonRefusal(
            f"only {n} nonzero differences (need >= 5): the signed-rank "
            f"test is underpowered to the point of being uninformative",
            n_nonzero=n,
        )
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0.0].sum())

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts))
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    sigma = math.sqrt(variance)
    delta = w_plus - mean
    if delta == 0.0:
        z = 0.0
    else:
        z = (delta - 0.5 * math.copysign(1.0, delta)) / sigma
    p_approx = math.erfc(abs(z) / math.sqrt(2.0))

    use_exact = mode == "exact" or (mode == "auto" and n <= 20)
    if use_exact:
        if n > 50:
            raise ValueError(
                f"exact mode supports up to 50 nonzero pairs (got {n}); "
                f"subset counts stay exactly representable there"
            )
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_signed_rank_p(doubled, int(round(2.0 * w_plus)))
    else:
        p = min(1.0, p_approx)
    return WilcoxonResult(statistic=w_plus, z=z, p_value=p,
                          n_nonzero=n, used_exact=use_exact)


def dunn_sidak_adjust(p: float, m: int) -> float:
    """Family-wise adjustment ``1 - (1 - p)^m`` for m comparisons.

    Computed in log space so small p-values keep their precision.
    Monotone in p and clamped to [0, 1].
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p >= 1.0:
        return 1.0
    return -math.expm1(m * math.log1p(-p))


def effect_size_r(z: float, n_pairs: int) -> float:
    """Standardized effect size |z| / sqrt(n) for a signed-rank z."""
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    return abs(z) / math.sqrt(n_pairs)


def cliffs_delta(a, b) -> float:
    """Cliff's delta: P(a > b) - P(a < b) over all cross pairs.

    Exact tie handling via one sort and two binary searches per element
    (O((n + m) log m) instead of the quadratic scan). Range [-1, 1];
    -1 means every a is below every b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    bs = np.sort(b)
    below = np.searchsorted(bs, a, side="left")      # b strictly below each a
    above = b.size - np.searchsorted(bs, a, side="right")
    greater_pairs = int(below.sum())
    less_pairs = int(above.sum())
    return (greater_pairs - less_pairs) / (a.size * b.size)


def quartile_tags(avg_ranks) -> tuple[int, ...]:
    """Quartile tag per algorithm from its average rank.

    Sorted position p (1-based, ascending, best first) maps to
    ``ceil(4 p / k)``; algorithms with exactly equal average ranks share
    the better (smaller) tag.
    """
    ranks = np.asarray(avg_ranks, dtype=float)
    k = ranks.size
    if k < 1:
        raise ValueError("need at least one rank")
    order = np.argsort(ranks, kind="stable")
    tags = np.empty(k, dtype=int)
    for pos, idx in enumerate(order, start=1):
        tags[idx] = math.ceil(4 * pos / k)
    for value in np.unique(ranks):
        group = ranks == value
        tags[group] = tags[group].min()
    return tuple(int(t) for t in tags)


def median_difference(a, b) -> float:
    """median(a) - median(b); negative means a sits lower (better)."""
    return float(np.median(np.asarray(a, dtype=float))
                 - np.median(np.asarray(b, dtype=float)))


@dataclass(frozen=True)
class PairwiseRow:
    """One reference-vs-other comparison line.

    ``note`` is empty for clean rows and carries the refusal reason when
    the Wilcoxon test was refused (p/z/r are NaN then; delta and the
    median difference are still reported since they need no test).
    """

    group1: str
    group2: str
    statistic: float
    p_raw: float
    p_adjusted: float
    z: float
    effect_r: float
    cliffs_delta: float
    median_diff: float
    note: str = ""


@dataclass(frozen=True)
class ComparisonReport:
    """Friedman block plus all pairwise rows against the reference."""

    friedman: FriedmanReport
    reference: str
    rows: tuple[PairwiseRow, ...]


def compare_all(matrix: BlockMatrix, reference: str,
                wilcoxon_mode: str = "auto") -> ComparisonReport:
    """Run the full pipeline: Friedman, then reference-vs-each pairwise.

    Produces k - 1 rows in the declared algorithm order with the
    Dunn-Sidak family size m = k - 1. Wilcoxon refusals become flagged
    rows instead of failures.
    """
    if reference not in matrix.algorithms:
        raise ValueError(
            f"reference {reference!r} not among algorithms {matrix.algorithms}"
        )
    friedman = friedman_test(matrix)
    ref_idx = matrix.algorithms.index(reference)
    ref_values = matrix.values[:, ref_idx]
    m = matrix.n_algorithms - 1
    rows = []
    for j, other in enumerate(matrix.algorithms):
        if j == ref_idx:
            continue
        other_values = matrix.values[:, j]
        delta = cliffs_delta(ref_values, other_values)
        med = median_difference(ref_values, other_values)
        try:
            w = wilcoxon_signed_rank(ref_values, other_values,
                                     mode=wilcoxon_mode)
            rows.append(PairwiseRow(
                group1=reference, group2=other,
                statistic=w.statistic,
                p_raw=w.p_value,
                p_adjusted=dunn_sidak_adjust(w.p_value, m),
                z=w.z,
                effect_r=effect_size_r(w.z, w.n_nonzero),
                cliffs_delta=delta,
                median_diff=med,
            ))
        except WilcoxonRefusal as refusal:
            rows.append(PairwiseRow(
                group1=reference, group2=other,
                statistic=math.nan,
                p_raw=math.nan, p_adjusted=math.nan,
                z=math.nan, effect_r=math.nan,
                cliffs_delta=delta, median_diff=med,
                note=f"{refusal.code}: {refusal}",
            ))
    return ComparisonReport(friedman=friedman, reference=reference,
                            rows=tuple(rows))


def format_p(p: float) -> str:
    """Render a p-value the way the report tables do.

    Values below 5e-4 print as "0.000" (the underflow convention);
    NaN renders as "n/a".
    """
    if math.isnan(p):
        return "n/a"
    if p < 5e-4:
        return "0.000"
    return f"{p:.3f}"
