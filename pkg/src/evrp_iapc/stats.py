"""Rank statistics used for model evaluation and arm comparison."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np
from scipy.stats import norm, rankdata


class AllZeroDifferences(ValueError):
    pass


def spearman(x, y) -> float:
    """Spearman's rho with average ranks for ties; nan if either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-d arrays of equal length")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx * rx).sum() * (ry * ry).sum()))
    if denom == 0:
        return math.nan
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))


def _signed_ranks(differences) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(differences, dtype=float)
    d = d[d != 0]
    if len(d) == 0:
        raise AllZeroDifferences("all paired differences are zero")
    return rankdata(np.abs(d)), d > 0


def wilcoxon_signed_rank(differences) -> tuple[float, float]:
    """Exact two-sided Wilcoxon signed-rank test.

    Zero differences are dropped; tied magnitudes get average ranks. The null
    distribution of W+ is the exact count over all 2^n sign assignments,
    accumulated on doubled (integer) ranks.
    """
    ranks, positive = _signed_ranks(differences)
    w_plus = float(ranks[positive].sum())
    doubled = [int(round(2 * r)) for r in ranks]
    counts: Counter[int] = Counter({0: 1})
    for r in doubled:
        step: Counter[int] = Counter()
        for s, c in counts.items():
            step[s] += c
            step[s + r] += c
        counts = step
    total = 2 ** len(doubled)
    w2 = int(round(2 * w_plus))
    lower = sum(c for s, c in counts.items() if s <= w2)
    upper = sum(c for s, c in counts.items() if s >= w2)
    p = min(Fraction(1), 2 * Fraction(min(lower, upper), total))
    return w_plus, float(p)


def wilcoxon_normal_p(differences) -> float:
    """Two-sided p from the normal approximation with tie and continuity corrections."""
    ranks, positive = _signed_ranks(differences)
    n = len(ranks)
    w_plus = ranks[positive].sum()
    mean = n * (n + 1) / 4
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - (tie_counts**3 - tie_counts).sum() / 48
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return float(min(1.0, 2 * norm.sf(z)))
