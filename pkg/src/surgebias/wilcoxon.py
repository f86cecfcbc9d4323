"""Wilcoxon signed-rank test for paired samples.

Conventions: zero differences are dropped, tied absolute differences get
midranks, the statistic is min(W+, W-), and the two-sided p-value is exact
(conditional on the observed ranks) up to 15 effective pairs, switching to
a tie-corrected normal approximation with continuity correction beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_LIMIT = 15


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact" or "normal-approximation"


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties replaced by the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: np.ndarray, w_min: float) -> float:
    """Exact p over the 2^n equiprobable sign assignments of the given ranks.

    Works on ranks doubled to integers (midranks are multiples of 1/2) and
    counts assignments with W+ <= w_min or W+ >= S - w_min via the null
    distribution built by convolution.
    """
    scaled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(scaled.sum())
    # counts[s] = number of assignments with 2*W+ == s
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    upper = 0
    for r in scaled:
        counts[r : upper + r + 1] += counts[: upper + 1].copy()
        upper += r
    w2 = int(round(2.0 * w_min))
    n_low = counts[: w2 + 1].sum()
    n_high = counts[total - w2 :].sum()
    p = (n_low + n_high) / 2.0 ** len(scaled)
    return min(1.0, float(p))


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test of paired samples ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty samples")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise ValueError("degenerate: all paired differences are zero")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    statistic = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, statistic)
        method = "exact"
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        # tie correction: subtract sum(t^3 - t)/48 over tie groups
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        if var <= 0.0:
            raise ValueError("degenerate: zero variance after tie correction")
        z = (statistic - mu + 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
        method = "normal-approximation"
    return WilcoxonResult(statistic=statistic, p_value=p, n_effective=n, method=method)
