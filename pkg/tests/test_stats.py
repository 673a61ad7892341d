import itertools
import math

import numpy as np
import pytest

from lvadbench.stats import box_stats, wilcoxon_paired


def brute_force_p(diffs):
    """Exact two-sided p by enumerating every sign assignment, written
    independently of the implementation (plain loops, scipy-free)."""
    d = [x for x in diffs if x != 0.0]
    n = len(d)
    absd = sorted((abs(x), i) for i, x in enumerate(d))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and absd[j + 1][0] == absd[i][0]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[absd[k][1]] = avg
        i = j + 1
    w_obs = sum(r for x, r in zip(d, ranks) if x > 0)
    total = sum(ranks)
    lo, hi = min(w_obs, total - w_obs), max(w_obs, total - w_obs)
    count = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for s, r in zip(signs, ranks) if s)
        if w <= lo + 1e-12 or w >= hi - 1e-12:
            count += 1
    return count / 2.0 ** n


def test_identical_series_degenerate():
    res = wilcoxon_paired([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert res.p_value == 1.0
    assert res.degenerate
    assert res.n == 0


def test_constant_shift_exact_p():
    a = np.arange(8, dtype=float)
    b = a + 1.0
    res = wilcoxon_paired(a, b)
    assert res.exact
    assert res.p_value == pytest.approx(2.0 / 2 ** 8)
    assert res.p_value == pytest.approx(0.0078125)


def test_too_few_nonzero_differences():
    with pytest.raises(ValueError):
        wilcoxon_paired([1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0])


def test_shape_mismatch():
    with pytest.raises(ValueError):
        wilcoxon_paired([1.0, 2.0], [1.0])


def test_exact_matches_brute_force_fuzz(rng):
    for _ in range(300):
        n = int(rng.integers(5, 11))
        a = rng.normal(0, 1, n)
        b = rng.normal(0.2, 1, n)
        res = wilcoxon_paired(a, b)
        assert res.exact
        assert res.p_value == pytest.approx(brute_force_p(a - b), abs=1e-12)


def test_exact_handles_tied_magnitudes():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    b = a - np.array([0.5, -0.5, 0.5, 0.5, -0.5, 0.5])
    res = wilcoxon_paired(a, b)
    assert res.exact
    assert res.p_value == pytest.approx(brute_force_p(a - b), abs=1e-12)


def test_normal_approximation_large_n(rng):
    a = rng.normal(0.0, 1.0, 80)
    b = a + rng.normal(0.6, 0.3, 80)
    res = wilcoxon_paired(a, b)
    assert not res.exact
    assert res.p_value < 1e-6
    null = wilcoxon_paired(a, a + rng.normal(0.0, 1.0, 80))
    assert null.p_value > 0.01


def test_normal_approximation_tracks_exact_near_boundary(rng):
    # n just above the exact limit: the approximation should be close
    for _ in range(20):
        n = 13
        a = rng.normal(0, 1, n)
        b = rng.normal(0.3, 1, n)
        approx = wilcoxon_paired(a, b).p_value
        exact = brute_force_p(a - b)
        assert approx == pytest.approx(exact, abs=0.05)


def test_box_stats_single_value():
    bs = box_stats([4.2])
    assert bs.mean == 4.2 and bs.std == 0.0
    assert bs.median == 4.2
    assert bs.outliers == []


def test_box_stats_outlier_example():
    bs = box_stats([1.0, 2.0, 3.0, 4.0, 100.0])
    assert bs.outliers == [100.0]
    assert bs.whisker_high == 4.0
    assert bs.whisker_low == 1.0
    assert bs.q1 == 2.0 and bs.q3 == 4.0


def test_box_stats_empty_rejected():
    with pytest.raises(ValueError):
        box_stats([])
