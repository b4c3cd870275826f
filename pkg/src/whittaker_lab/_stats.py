"""Shared goodness-of-fit plumbing for the simulation checks.

Every distributional check in the package reports through the same small
record type so the command-line ``verify`` output can treat them
uniformly: a named statistic, a p-value when the test has one, a pass
flag, and a details dict with whatever per-bin or per-check numbers the
caller wants to keep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

__all__ = ["GoodnessOfFit", "chi_square_counts", "ks_pvalue"]


@dataclass
class GoodnessOfFit:
    name: str
    statistic: float
    p_value: float
    passed: bool
    df: int | None = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)


def chi_square_counts(counts, probs, total=None, min_expected=5.0):
    """Pearson chi-square of observed counts against cell probabilities.

    Cells with expected count below ``min_expected`` are pooled into a
    single leftover cell (together with whatever probability mass the
    listed cells do not cover).  Returns (statistic, df, p_value,
    n_cells_used).
    """
    counts = np.asarray(counts, dtype=float).ravel()
    probs = np.asarray(probs, dtype=float).ravel()
    if counts.shape != probs.shape:
        raise ValueError("counts and probs must have matching shapes")
    if total is None:
        total = counts.sum()
    expected = total * probs
    keep = expected >= min_expected
    if keep.sum() < 2:
        raise ValueError("fewer than two usable cells; widen the binning")
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2
                        / expected[keep]))
    cells = int(keep.sum())
    pooled_expected = total - expected[keep].sum()
    pooled_observed = total - counts[keep].sum()
    if pooled_expected >= min_expected:
        stat += (pooled_observed - pooled_expected) ** 2 / pooled_expected
        cells += 1
    df = cells - 1
    p = float(_scipy_stats.chi2.sf(stat, df))
    return stat, df, p, cells


def ks_pvalue(samples, cdf):
    """One-sample Kolmogorov-Smirnov p-value against a callable CDF."""
    res = _scipy_stats.kstest(np.asarray(samples, dtype=float), cdf)
    return float(res.statistic), float(res.pvalue)
