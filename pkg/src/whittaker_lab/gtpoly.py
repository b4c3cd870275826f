"""Interlacing triangular patterns, their polytopes, and Monte Carlo tools.

A pattern over a strictly decreasing bottom row x is a triangular array
P_{k,j} (1 <= j <= k <= n, row n equal to x) with
P_{k,j+1} <= P_{k-1,j} <= P_{k,j}.  The patterns with bottom row x form a
polytope; its uniform measure pushes forward through the type map to a
discretization-free Monte Carlo route to the determinant ratio hciz_J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import hciz_J

__all__ = [
    "GTPattern", "TriangularArray", "pattern_type",
    "GibbsSampler", "gt_gibbs_sample",
    "gt_volume", "VolumeResult", "dh_estimate_J",
]


def _check_rows(rows):
    rows = [np.asarray(r, dtype=float).copy() for r in rows]
    for k, r in enumerate(rows):
        if r.ndim != 1 or r.size != k + 1:
            raise ValueError(f"row {k + 1} must have length {k + 1}")
    return rows


@dataclass
class TriangularArray:
    """Plain triangular array T_{k,i}, 1 <= i <= k <= n; no shape constraints
    beyond triangularity.  rows[k-1] is row k; the length-n row is the one
    tied to the defining vector in the integral representations."""

    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = _check_rows(self.rows)

    @property
    def n(self):
        return len(self.rows)

    def row(self, k):
        """Row k (1-based), length k."""
        return self.rows[k - 1]

    def copy(self):
        return type(self)([r.copy() for r in self.rows])


@dataclass
class GTPattern(TriangularArray):
    """Triangular array with the interlacing constraints."""

    def interlacing_ok(self, tol=0.0):
        for k in range(2, self.n + 1):
            lower, upper = self.rows[k - 2], self.rows[k - 1]
            for j in range(1, k):
                if not (upper[j] - tol <= lower[j - 1] <= upper[j - 1] + tol):
                    return False
        return True

    @property
    def bottom_row(self):
        return self.rows[-1]


def pattern_type(P):
    """Row-sum increments (type map): type_k = sum(row k) - sum(row k-1).

    Components sum to the total of the longest row.  Under the uniform
    measure on the pattern polytope this vector has the same law as the
    diagonal of a conjugated Hermitian matrix with spectrum x.
    """
    sums = [float(np.sum(r)) for r in P.rows]
    return np.array([sums[0]] + [sums[k] - sums[k - 1]
                                 for k in range(1, len(sums))])


def _require_chamber(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("x must be a 1-d vector")
    if np.any(np.diff(x) >= 0):
        raise ValueError("x must be strictly decreasing")
    return x


class GibbsSampler:
    """Single-site Gibbs sampler for the uniform measure on the polytope.

    Every conditional is an exact uniform interval, so each site update is
    exact; sweeps raster through rows 1..n-1.  One instance is not meant to
    be shared mid-sweep; independent instances are safe concurrently.
    """

    def __init__(self, x, rng):
        x = _require_chamber(x)
        self.n = x.size
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(int(rng))
        self.rng = rng
        # midpoint-of-box start: P_{k,j} = (x_j + x_{j+n-k})/2 interlaces
        rows = []
        for k in range(1, self.n + 1):
            rows.append(np.array([(x[j] + x[j + self.n - k]) / 2.0
                                  for j in range(k)]))
        rows[-1] = x.copy()
        self.pattern = GTPattern(rows)

    def sweep(self, count=1):
        rows = self.pattern.rows
        n = self.n
        for _ in range(count):
            for k in range(1, n):        # row index (1-based), row n is pinned
                row = rows[k - 1]
                up = rows[k]             # row k+1, length k+1
                down = rows[k - 2] if k >= 2 else None
                for j in range(1, k + 1):
                    lo = up[j]           # P_{k+1,j+1}
                    hi = up[j - 1]       # P_{k+1,j}
                    if down is not None:
                        if j <= k - 1:
                            lo = max(lo, down[j - 1])   # P_{k-1,j}
                        if j >= 2:
                            hi = min(hi, down[j - 2])   # P_{k-1,j-1}
                    row[j - 1] = self.rng.uniform(lo, hi)
        return self.pattern


def gt_gibbs_sample(x, sweeps, rng_seed):
    """Pattern after `sweeps` full Gibbs sweeps; deterministic given seed."""
    sampler = GibbsSampler(x, np.random.default_rng(int(rng_seed)))
    sampler.sweep(sweeps)
    return sampler.pattern


@dataclass
class VolumeResult:
    value: float
    stderr: float
    method: str

    def __float__(self):
        return self.value


def gt_volume(x, method="limit", samples=200_000, rng_seed=0):
    """Lebesgue volume of the pattern polytope over x.

    method="limit": the zero-spectral-parameter value of the determinant
    ratio (exact, via the confluent route).  method="rejection": uniform
    sampling of the bounding box P_{k,j} in [x_{j+n-k}, x_j] (n <= 4);
    stderr is the binomial Monte Carlo error times the box volume.
    """
    x = _require_chamber(x)
    n = x.size
    if method == "limit":
        return VolumeResult(hciz_J(np.zeros(n), x), 0.0, "limit")
    if method != "rejection":
        raise ValueError("method must be 'limit' or 'rejection'")
    if n > 4:
        raise ValueError("rejection route supports n <= 4")
    if n == 1:
        return VolumeResult(1.0, 0.0, "rejection")  # zero-dim polytope
    rng = np.random.default_rng(int(rng_seed))
    los, his = [], []
    for k in range(1, n):
        for j in range(1, k + 1):
            los.append(x[j + n - k - 1])
            his.append(x[j - 1])
    los, his = np.array(los), np.array(his)
    box = float(np.prod(his - los))
    u = rng.uniform(los, his, size=(samples, los.size))
    hits = np.ones(samples, dtype=bool)
    # rebuild rows per sample and test interlacing vectorized
    rows = [None] * (n + 1)
    pos = 0
    for k in range(1, n):
        rows[k] = u[:, pos:pos + k]
        pos += k
    rows[n] = np.broadcast_to(x, (samples, n))
    for k in range(2, n + 1):
        lower, upper = rows[k - 1], rows[k]
        for j in range(1, k):
            hits &= (upper[:, j] <= lower[:, j - 1]) & (
                lower[:, j - 1] <= upper[:, j - 1])
    p = float(np.mean(hits))
    stderr = box * math.sqrt(max(p * (1 - p), 1e-12) / samples)
    return VolumeResult(box * p, stderr, "rejection")


def dh_estimate_J(lam, x, samples=20_000, rng_seed=0, burn_in=50, thin=5):
    """Monte Carlo route to the determinant ratio through the type map:

        estimate = vol(polytope) * mean(exp(lam . type(P)))

    over Gibbs samples (burn-in then thinning).  Returns (estimate, stderr)
    with a batch-means stderr that absorbs residual autocorrelation.
    """
    lam = np.asarray(lam, dtype=float)
    x = _require_chamber(x)
    if lam.size != x.size:
        raise ValueError("lam and x must have the same length")
    vol = gt_volume(x, method="limit").value
    sampler = GibbsSampler(x, np.random.default_rng(int(rng_seed)))
    sampler.sweep(burn_in)
    vals = np.empty(samples)
    for i in range(samples):
        sampler.sweep(thin)
        vals[i] = math.exp(float(lam @ pattern_type(sampler.pattern)))
    nbatch = 20
    cut = (samples // nbatch) * nbatch
    batches = vals[:cut].reshape(nbatch, -1).mean(axis=1)
    stderr = vol * float(np.std(batches, ddof=1)) / math.sqrt(nbatch)
    return vol * float(np.mean(vals)), stderr
