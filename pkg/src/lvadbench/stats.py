"""Paired comparison statistics and box-plot summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EXACT_LIMIT = 12   # exact signed-rank distribution up to this many pairs


@dataclass
class WilcoxonResult:
    statistic: float          # W+, sum of positive-difference ranks
    p_value: float
    n: int                    # pairs remaining after zero differences drop
    degenerate: bool = False  # all differences were zero
    exact: bool = True


def _ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) of |values|, ties averaged."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_paired(a, b) -> WilcoxonResult:
    """Two-sided paired signed-rank test of a vs b.

    Exact null distribution (all sign assignments of the observed ranks)
    for n <= 12; otherwise a normal approximation with tie and continuity
    corrections.  Zero differences are dropped first; an all-zero input
    reports p = 1 with the degenerate flag set.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D with equal length")
    d = a - b
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n=0, degenerate=True)
    if n < 5:
        raise ValueError(f"need >= 5 nonzero differences, got {n}")
    ranks = _ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    total = float(ranks.sum())

    if n <= EXACT_LIMIT:
        bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
        sums = bits @ ranks
        lo, hi = min(w_plus, total - w_plus), max(w_plus, total - w_plus)
        p = float(((sums <= lo + 1e-12).sum() + (sums >= hi - 1e-12).sum())
                  / 2.0 ** n)
        return WilcoxonResult(statistic=w_plus, p_value=min(1.0, p), n=n)

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var -= float(((counts ** 3 - counts) / 48.0).sum())
    if var <= 0:
        return WilcoxonResult(statistic=w_plus, p_value=1.0, n=n,
                              degenerate=True, exact=False)
    z = w_plus - mean
    z -= 0.5 * math.copysign(1.0, z) if z != 0 else 0.0
    z /= math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return WilcoxonResult(statistic=w_plus, p_value=min(1.0, p), n=n,
                          exact=False)


@dataclass
class BoxStats:
    n: int
    mean: float
    std: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list = field(default_factory=list)


def box_stats(values) -> BoxStats:
    """Quartiles and 1.5*IQR whiskers; points beyond are outliers."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("empty sample")
    q1, med, q3 = (float(x) for x in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = v[(v < lo_fence) | (v > hi_fence)]
    return BoxStats(n=int(v.size), mean=float(v.mean()),
                    std=float(v.std(ddof=0)), median=med, q1=q1, q3=q3,
                    whisker_low=float(inside.min()),
                    whisker_high=float(inside.max()),
                    outliers=[float(x) for x in outliers])
