"""Independent evaluators of the GL(n) Whittaker function (n <= 3).

Routes
------
* whittaker_quadrature   -- layered kernel recursion (the defining one):
  psi^(1) = e^{lam x}, then one integral layer per rank through the
  positive kernel Q_theta.
* whittaker_givental_mc  -- importance sampling in the positive
  factorization coordinates: Gamma proposals, weights bounded by 1.
* whittaker_lusztig_n3   -- the explicit 3-d positive-coordinate integral,
  log-substituted tensor quadrature.
* whittaker_energy_integral -- rank-3 cross-check form: direct tensor
  quadrature of exp(F_lam(T)) over the interior triangular-array entries
  (same function, no layered reuse; reported under the lusztig route).
* (series route lives in specfun.whittaker_from_series.)

Conventions (fixed across the package, see README):
* triangular arrays store row k at rows[k-1]; the length-n row equals x;
* F_lam pairs lam_k with the k-th row-sum increment ("type"), ascending --
  the orientation forced by the kernel recursion;
* the eigen-operator convention is H = Laplacian - 2 sum_i e^{x_{i+1}-x_i},
  H psi = (sum_i lam_i^2) psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import shard_map
from ._quad import QuadratureError
from .gtpoly import TriangularArray, pattern_type
from .specfun import log_gamma

__all__ = [
    "QuadSpec", "WhittakerEval",
    "baxter_kernel", "baxter_identity_residual",
    "givental_energy", "lusztig_r",
    "whittaker_quadrature", "whittaker_energy_integral",
    "whittaker_givental_mc", "whittaker_lusztig_n3",
    "asymptotic_check", "zero_temperature_limit",
    "eigen_residual", "conditional_kernel_k",
]


@dataclass
class QuadSpec:
    """Controls for the tensor-grid quadratures.

    nodes: per-axis node count (forced odd); drop: log-units of integrand
    decay that define the windows; rel_tol: refinement target; max_refine:
    how many node-doublings may chase it; frozen: the window dict from a
    previous evaluation's meta, for stencil work where the grid must not
    move between calls.
    """

    nodes: int = 161
    drop: float = 46.0
    pad: float = 1.0
    rel_tol: float = 1e-8
    max_refine: int = 3
    frozen: dict | None = None


@dataclass
class WhittakerEval:
    value: float
    est_error: float
    route: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ArithmeticError(f"non-finite Whittaker value ({self.route})")
        if self.est_error < 0:
            raise ArithmeticError("negative error estimate")

    def __float__(self):
        return float(np.real(self.value))


# ---------------------------------------------------------------------------
# kernel and energy
# ---------------------------------------------------------------------------


def baxter_kernel(theta, x, y):
    """Positive integral kernel coupling rank n to rank n-1:

        Q_theta(x, y) = exp(theta (sum x - sum y)
                            - sum_i [e^{y_i - x_i} + e^{x_{i+1} - y_i}]).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size != x.size - 1:
        raise ValueError("y must have length one less than x")
    ex = np.sum(np.exp(y - x[:-1])) + np.sum(np.exp(x[1:] - y))
    return float(np.exp(theta * (np.sum(x) - np.sum(y)) - ex))


def baxter_identity_residual(theta, x, y, h=1e-4):
    """Finite-difference residual of (H_x - theta^2) Q = H_y Q.

    H_z = Laplacian_z - 2 sum_i e^{z_{i+1} - z_i}, acting in x (rank n) on
    the left and in y (rank n-1) on the right; this identity is what makes
    the kernel recursion produce eigenfunctions.  Returns |lhs - rhs|/|Q|.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q0 = baxter_kernel(theta, x, y)

    def lap_x():
        total = 0.0
        for i in range(x.size):
            e = np.zeros(x.size)
            e[i] = h
            total += (baxter_kernel(theta, x + e, y) - 2 * q0
                      + baxter_kernel(theta, x - e, y)) / (h * h)
        return total

    def lap_y():
        total = 0.0
        for i in range(y.size):
            e = np.zeros(y.size)
            e[i] = h
            total += (baxter_kernel(theta, x, y + e) - 2 * q0
                      + baxter_kernel(theta, x, y - e)) / (h * h)
        return total

    pot_x = 2.0 * np.sum(np.exp(x[1:] - x[:-1]))
    pot_y = 2.0 * np.sum(np.exp(y[1:] - y[:-1])) if y.size > 1 else 0.0
    lhs = lap_x() - pot_x * q0 - theta * theta * q0
    rhs = lap_y() - pot_y * q0
    return abs(lhs - rhs) / abs(q0)


def givental_energy(lam, T):
    """F_lam(T): spectral part lam . type(T) minus the exponential gaps.

        F = sum_k lam_k (sum_i T_{k,i} - sum_i T_{k-1,i})
            - sum_{1<=i<=k<=n-1} [e^{T_{k,i}-T_{k+1,i}} + e^{T_{k+1,i+1}-T_{k,i}}]

    lam_k multiplies the k-th row-sum increment (ascending pairing -- the
    orientation the kernel recursion forces; the rank-2 closed form is
    symmetric in lam and cannot distinguish the two printed conventions).
    """
    lam = np.asarray(lam, dtype=complex)
    rows = T.rows if isinstance(T, TriangularArray) else [
        np.asarray(r, dtype=float) for r in T]
    n = len(rows)
    if lam.size != n:
        raise ValueError("lam length must match the array depth")
    spectral = np.dot(lam, pattern_type(TriangularArray(rows)))
    gaps = 0.0
    for k in range(1, n):           # row k against row k+1
        rk, rk1 = rows[k - 1], rows[k]
        gaps += np.sum(np.exp(rk - rk1[:-1]))      # e^{T_{k,i} - T_{k+1,i}}
        gaps += np.sum(np.exp(rk1[1:] - rk))       # e^{T_{k+1,i+1} - T_{k,i}}
    val = spectral - gaps
    return float(np.real(val)) if np.imag(val) == 0.0 else complex(val)


def lusztig_r(v):
    """Positive-coordinate rate functions for rank 3:

        r_1(v) = 1/v_1,   r_2(v) = (v_1 + v_3) / (v_2 v_3).
    """
    v1, v2, v3 = v
    return 1.0 / v1, (v1 + v3) / (v2 * v3)


# ---------------------------------------------------------------------------
# shared quadrature plumbing
# ---------------------------------------------------------------------------


def _probe_window(log_f, lo, hi, drop, pad, probes=600):
    t = np.linspace(lo, hi, probes)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        vals = np.array([log_f(float(ti)) for ti in t], dtype=float)
    vals[~np.isfinite(vals)] = -np.inf
    top = np.max(vals)
    if top == -np.inf:
        raise QuadratureError("integrand vanished on the probe range")
    keep = np.where(vals >= top - drop)[0]
    a = t[max(keep[0] - 1, 0)] - pad
    b = t[min(keep[-1] + 1, probes - 1)] + pad
    return float(a), float(b)


def _trap_grid(a, b, n):
    t = np.linspace(a, b, n)
    w = np.full(n, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


def _base_nodes(grid, *windows):
    """Per-axis starting node count: at least grid.nodes, and at least 8
    nodes per unit of the widest window (the integrand walls have order-one
    feature width, so wide plateaus must not dilute the node budget)."""
    width = max(w[1] - w[0] for w in windows)
    return max(grid.nodes, int(8 * width) + 1)


def _refine(evaluate, grid, route, meta, base_nodes=None):
    """Full-vs-halved-grid error estimate plus node-doubling refinement."""
    nodes = (base_nodes if base_nodes is not None else grid.nodes) | 1
    val = evaluate(nodes)
    coarse = evaluate(nodes // 2 + 1)
    est = abs(val - coarse)
    for _ in range(grid.max_refine):
        if est <= grid.rel_tol * max(abs(val), 1e-300):
            break
        coarse, nodes = val, 2 * nodes - 1
        val = evaluate(nodes)
        est = abs(val - coarse)
    if est > 10.0 * grid.rel_tol * max(abs(val), 1e-300):
        raise QuadratureError(
            f"{route}: refinement still moves the value by {est:.3e} "
            f"(tolerance {grid.rel_tol:.1e})")
    meta = dict(meta)
    meta["nodes"] = nodes
    return WhittakerEval(_realify(val), float(est), route, meta)


def _realify(v):
    v = complex(v)
    if abs(v.imag) <= 1e-9 * max(abs(v.real), 1e-300):
        return float(v.real)
    return v


def _as_spectral(lam, x):
    lam = np.asarray(lam, dtype=complex)
    if np.all(lam.imag == 0.0):
        lam = lam.real.astype(float)
    x = np.asarray(x, dtype=float)
    if lam.shape != x.shape or x.ndim != 1:
        raise ValueError("lam and x must be equal-length 1-d vectors")
    return lam, x


# ---------------------------------------------------------------------------
# route 1: kernel recursion
# ---------------------------------------------------------------------------


def _psi2_window(lam, x, grid):
    return _probe_window(
        lambda t: float(np.real(lam[1]) * (x[0] + x[1] - t)
                        + np.real(lam[0]) * t
                        - math.exp(t - x[0]) - math.exp(x[1] - t)),
        min(x) - grid.drop, max(x) + grid.drop, grid.drop, grid.pad)


def _psi2_value(lam, x, nodes, window):
    t, w = _trap_grid(window[0], window[1], nodes)
    expo = (lam[1] * (x[0] + x[1] - t) + lam[0] * t
            - np.exp(t - x[0]) - np.exp(x[1] - t))
    return np.sum(w * np.exp(expo))


def _inner_c_values(dl, ds, s_window, nodes):
    """C(d) = int exp(dl*s - 2 e^{d/2} cosh s) ds for an array of d."""
    s, w = _trap_grid(s_window[0], s_window[1], nodes)
    with np.errstate(over="ignore", under="ignore"):
        expo = (dl * s)[None, :] - 2.0 * np.exp(ds / 2.0)[:, None] * (
            np.cosh(s)[None, :])
        vals = np.exp(expo)
    if vals.dtype.kind == "c":
        vals[~np.isfinite(vals.real) | ~np.isfinite(vals.imag)] = 0.0
    else:
        vals[~np.isfinite(vals)] = 0.0
    return vals @ w


def _psi3_value(lam, x, nodes, window, s_window):
    """Rank 3 on a shared middle-row grid with the difference-diagonal trick:

    psi3 = e^{lam_3 sum(x)} int f1(y1) f2(y2) C(y2 - y1) dy1 dy2, where C is
    the rank-2 inner integral as a function of the middle-row gap only.
    """
    y, w = _trap_grid(window[0], window[1], nodes)
    h = y[1] - y[0]
    dl = lam[0] - lam[1]
    dvals = h * np.arange(-(nodes - 1), nodes)
    cvals = _inner_c_values(dl, dvals, s_window, nodes)
    idx = np.arange(nodes)
    cmat = cvals[idx[None, :] - idx[:, None] + nodes - 1]  # [i,j] = C(y_j - y_i)
    lam12 = (lam[0] + lam[1]) / 2.0
    with np.errstate(over="ignore", under="ignore"):
        f1 = np.exp((lam12 - lam[2]) * y - np.exp(y - x[0]) - np.exp(x[1] - y))
        f2 = np.exp((lam12 - lam[2]) * y - np.exp(y - x[1]) - np.exp(x[2] - y))
    pref = np.exp(lam[2] * (x[0] + x[1] + x[2]))
    return pref * ((f1 * w) @ cmat @ (f2 * w))


def _psi3_windows(lam, x, grid):
    lam12 = float(np.real(lam[0] + lam[1])) / 2.0
    lam3 = float(np.real(lam[2]))

    def log_axis(t, xa, xb):
        return (lam12 - lam3) * t - math.exp(t - xa) - math.exp(xb - t)

    lo, hi = min(x) - grid.drop, max(x) + grid.drop
    w1 = _probe_window(lambda t: log_axis(t, x[0], x[1]), lo, hi,
                       grid.drop, grid.pad)
    w2 = _probe_window(lambda t: log_axis(t, x[1], x[2]), lo, hi,
                       grid.drop, grid.pad)
    window = (min(w1[0], w2[0]), max(w1[1], w2[1]))
    # inner integral: exp(Re(dl) s - 2 e^{d/2} cosh s); the widest s-support
    # happens at the most negative middle-row gap d
    dmin = window[0] - window[1]
    s_half = (math.log(2.0 * grid.drop) - dmin / 2.0
              + abs(float(np.real(lam[0] - lam[1]))) + grid.pad + 2.0)
    return window, (-s_half, s_half)


def whittaker_quadrature(lam, x, grid=None):
    """The kernel-recursion evaluator (n <= 3).

    Rank 1 is exact; rank 2 is one windowed trapezoid layer; rank 3 reuses
    the rank-2 inner integral as a function of the middle-row difference so
    the double layer costs O(nodes^2).  The error estimate compares the
    full grid against its every-other-node subgrid; refinement doubles the
    node count up to max_refine times and raises if the last doubling still
    moved the value by more than 10x the requested tolerance.
    """
    grid = grid or QuadSpec()
    lam, x = _as_spectral(lam, x)
    n = x.size
    if n > 3:
        raise ValueError("quadrature route implemented for n <= 3")
    if n == 1:
        return WhittakerEval(_realify(np.exp(lam[0] * x[0])), 0.0,
                             "quadrature", {"nodes": 0})
    if n == 2:
        window = (grid.frozen["window"] if grid.frozen is not None
                  else _psi2_window(lam, x, grid))
        return _refine(lambda m: _psi2_value(lam, x, m, window),
                       grid, "quadrature", {"window": window},
                       base_nodes=_base_nodes(grid, window))
    if grid.frozen is not None:
        window, s_window = grid.frozen["window"], grid.frozen["s_window"]
    else:
        window, s_window = _psi3_windows(lam, x, grid)
    return _refine(lambda m: _psi3_value(lam, x, m, window, s_window),
                   grid, "quadrature",
                   {"window": window, "s_window": s_window},
                   base_nodes=_base_nodes(grid, window, s_window))


# ---------------------------------------------------------------------------
# route 2: direct tensor quadrature of exp(F)
# ---------------------------------------------------------------------------


def whittaker_energy_integral(lam, x, grid=None):
    """int exp(F_lam(T)) d(interior rows) for n=3, without layer reuse.

    The direct triangular-array form of the same function that
    whittaker_quadrature computes recursively; it exists as an independent
    numerical path for cross-checks (and is reported under the lusztig
    route, whose change-of-variables partner it is).
    """
    grid = grid or QuadSpec(nodes=121, rel_tol=1e-7)
    lam, x = _as_spectral(lam, x)
    if x.size != 3:
        raise ValueError("the direct triangular-array form is rank-3 only")

    # interior coordinates: u = T_{1,1}, s = T_{2,1}, t = T_{2,2}
    # F = lam1 u + lam2 (s+t-u) + lam3 (sum x - s - t)
    #     - e^{u-s} - e^{t-u} - e^{s-x1} - e^{x2-s} - e^{t-x2} - e^{x3-t}
    lam2r, lam3r = float(np.real(lam[1])), float(np.real(lam[2]))

    def log_axis_s(t):
        return (lam2r - lam3r) * t - math.exp(t - x[0]) - math.exp(x[1] - t)

    def log_axis_t(t):
        return (lam2r - lam3r) * t - math.exp(t - x[1]) - math.exp(x[2] - t)

    lo, hi = min(x) - grid.drop, max(x) + grid.drop
    w_s = _probe_window(log_axis_s, lo, hi, grid.drop, grid.pad)
    w_t = _probe_window(log_axis_t, lo, hi, grid.drop, grid.pad)
    c_s, c_t = 0.5 * (w_s[0] + w_s[1]), 0.5 * (w_t[0] + w_t[1])

    def log_axis_u(t):
        return (float(np.real(lam[0] - lam[1])) * t
                - math.exp(t - c_s) - math.exp(c_t - t))

    w_u = _probe_window(log_axis_u, lo - grid.drop, hi + grid.drop,
                        grid.drop, grid.pad + 2.0)

    def evaluate(m):
        u, wu = _trap_grid(w_u[0], w_u[1], m)
        s, ws = _trap_grid(w_s[0], w_s[1], m)
        t, wt = _trap_grid(w_t[0], w_t[1], m)
        with np.errstate(over="ignore", under="ignore"):
            fu = np.exp((lam[0] - lam[1]) * u)
            fs = np.exp((lam[1] - lam[2]) * s - np.exp(s - x[0])
                        - np.exp(x[1] - s)) * ws
            ft = np.exp((lam[1] - lam[2]) * t - np.exp(t - x[1])
                        - np.exp(x[2] - t)) * wt
            dus = np.exp(-np.exp(u[:, None] - s[None, :]))   # e^{-e^{u-s}}
            dtu = np.exp(-np.exp(t[None, :] - u[:, None]))   # e^{-e^{t-u}}
        inner_s = dus @ fs          # per-u integral over s
        inner_t = dtu @ ft          # per-u integral over t
        pref = np.exp(lam[2] * (x[0] + x[1] + x[2]))
        return pref * np.sum(wu * fu * inner_s * inner_t)

    return _refine(evaluate, grid, "lusztig",
                   {"form": "T-array",
                    "windows": {"u": w_u, "s": w_s, "t": w_t}},
                   base_nodes=_base_nodes(grid, w_u, w_s, w_t))


# ---------------------------------------------------------------------------
# route 3: Monte Carlo in positive coordinates
# ---------------------------------------------------------------------------

_MC_SHARDS = 16


def _chamber_gaps(lam):
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    thetas = []
    for i in range(n):
        for j in range(i + 1, n):
            thetas.append(lam[i] - lam[j])
    if any(t <= 0 for t in thetas):
        raise ValueError("lam must be strictly decreasing (open chamber)")
    return thetas


def whittaker_givental_mc(lam, x, samples=200_000, rng_seed=0):
    """Monte Carlo evaluator in the positive factorization coordinates.

    Draws the q = n(n-1)/2 coordinates from Gamma proposals whose shapes
    are the positive-root gaps of lam, weights each draw by
    exp(-sum_i e^{-(x_i - x_{i+1})} r_i(v)) <= 1, and rescales by
    e^{lam.x} prod Gamma(theta_k).  n in {2, 3}; lam real, strictly
    decreasing.  Work is split over fixed shards with seed-derived streams,
    so results do not depend on the thread count.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    if lam.size != n:
        raise ValueError("lam and x must have the same length")
    if n not in (2, 3):
        raise ValueError("MC route implemented for n in {2, 3}")
    thetas = _chamber_gaps(lam)     # (lam1-lam2[, lam1-lam3, lam2-lam3])
    alphas = x[:-1] - x[1:]
    per_shard = max(1, samples // _MC_SHARDS)

    def run_shard(k):
        rng = np.random.default_rng([int(rng_seed), k])
        if n == 2:
            v1 = rng.gamma(thetas[0], size=per_shard)
            expo = -math.exp(-alphas[0]) / v1
        else:
            v1 = rng.gamma(thetas[0], size=per_shard)
            v2 = rng.gamma(thetas[1], size=per_shard)
            v3 = rng.gamma(thetas[2], size=per_shard)
            r1, r2 = lusztig_r((v1, v2, v3))
            expo = -math.exp(-alphas[0]) * r1 - math.exp(-alphas[1]) * r2
        w = np.exp(expo)
        return w.sum(), np.square(w).sum(), w.size

    parts = shard_map(run_shard, _MC_SHARDS)
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) / count
    scale = math.exp(float(lam @ x)
                     + float(np.sum([log_gamma(t).real for t in thetas])))
    return WhittakerEval(scale * mean, scale * math.sqrt(var), "givental_mc",
                         {"samples": count, "thetas": thetas})


# ---------------------------------------------------------------------------
# route 4: explicit rank-3 positive-coordinate integral
# ---------------------------------------------------------------------------


def whittaker_lusztig_n3(lam, x, grid=None):
    """The explicit 3-d integral in log coordinates v_k = e^{w_k}:

        psi = e^{lam.x} int prod_k v_k^{theta_k} e^{-v_k}
              exp(-e^{-a_1}/v_1 - e^{-a_2}(v_1+v_3)/(v_2 v_3)) dw,

    with theta = (lam1-lam2, lam1-lam3, lam2-lam3), a_i the consecutive
    x-gaps (the Jacobian turns v^{theta-1}dv into v^theta dw).  Separable
    up to one coupling term, evaluated as per-axis windowed trapezoid.
    """
    grid = grid or QuadSpec(nodes=121, rel_tol=1e-7)
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    if lam.size != 3 or x.size != 3:
        raise ValueError("this route is rank-3 only")
    th = _chamber_gaps(lam)
    a1 = math.exp(-(x[0] - x[1]))
    a2 = math.exp(-(x[1] - x[2]))

    # log-integrand pieces: g_k(w) = theta_k w - e^w (+ singular couplings)
    def log_axis(theta, extra):
        return lambda t: theta * t - math.exp(t) + extra(t)

    # the factor exp(-a2 r_2) splits as exp(-a2/v2) exp(-a2 v1/(v2 v3)):
    # axes 1 and 2 carry their own singular cutoffs, axis 3's lower cutoff
    # comes from the residual coupling only
    w1 = _probe_window(log_axis(th[0], lambda t: -a1 * math.exp(-t)),
                       -grid.drop, grid.drop, grid.drop, grid.pad)
    w2 = _probe_window(log_axis(th[1], lambda t: -a2 * math.exp(-t)),
                       -grid.drop, grid.drop, grid.drop, grid.pad)
    # hard lower edge for w3: with w1 >= w1_lo and w2 <= w2_hi forced by
    # their own cutoffs, the coupling a2 e^{w1-w2-w3} already exceeds
    # `drop` below this point
    w3_lo = w1[0] - w2[1] - math.log(grid.drop / a2)
    w3 = _probe_window(log_axis(th[2], lambda t: 0.0),
                       w3_lo, grid.drop, grid.drop, grid.pad)
    # shared grid for axes 2, 3: the coupling depends on w2 + w3 only, so
    # on a common uniform grid the double sum over (w2, w3) collapses to a
    # convolution and the whole integral costs O(m^2)
    w23 = (min(w2[0], w3[0]), max(w2[1], w3[1]))

    def evaluate(m):
        t1, q1 = _trap_grid(w1[0], w1[1], m)
        t2, q2 = _trap_grid(w23[0], w23[1], m)
        with np.errstate(over="ignore", under="ignore"):
            f1 = np.exp(th[0] * t1 - np.exp(t1) - a1 * np.exp(-t1)) * q1
            f2 = np.exp(th[1] * t2 - np.exp(t2) - a2 * np.exp(-t2)) * q2
            f3 = np.exp(th[2] * t2 - np.exp(t2)) * q2
            pair = np.convolve(f2, f3)          # sum over w2 + w3 = const
            sig = 2.0 * w23[0] + (t2[1] - t2[0]) * np.arange(2 * m - 1)
            coupling = np.exp(-a2 * np.exp(t1[:, None] - sig[None, :]))
        val = f1 @ (coupling @ pair)
        return math.exp(float(lam @ x)) * val

    return _refine(evaluate, grid, "lusztig",
                   {"form": "v-coordinates",
                    "windows": {"w1": w1, "w23": w23}, "thetas": th},
                   base_nodes=_base_nodes(grid, w1, w23))


# ---------------------------------------------------------------------------
# asymptotics, scaling limits, eigen residual, conditional kernels
# ---------------------------------------------------------------------------


def asymptotic_check(lam, x_gap, grid=None):
    """(value, target) for the deep-chamber limit of e^{-lam.x} psi_lam(x).

    x has all consecutive gaps equal to x_gap (centered); target is
    prod_{i<j} Gamma(lam_i - lam_j).  The domination bound
    value <= target (up to quadrature error and 1e-9 slack) is enforced.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    thetas = _chamber_gaps(lam)
    x = x_gap * (0.5 * (n - 1) - np.arange(n))
    ev = whittaker_quadrature(lam, x, grid)
    value = float(ev) * math.exp(-float(lam @ x))
    target = float(np.exp(np.sum([log_gamma(t).real for t in thetas])))
    slack = max(1e-9 * target, 3.0 * ev.est_error * math.exp(-float(lam @ x)))
    if value > target + slack:
        raise ArithmeticError(
            f"domination bound violated: {value:.12g} > {target:.12g}")
    return value, target


def zero_temperature_limit(lam, x, beta, grid=None):
    """beta^{-n(n-1)/2} psi_{lam/beta}(beta x): the low-noise rescaling that
    degenerates the eigenfunction to the determinant ratio hciz_J."""
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = x.size
    ev = whittaker_quadrature(lam / beta, beta * x, grid)
    return float(ev) * beta ** (-(n * (n - 1)) // 2)


def eigen_residual(lam, x, h=1e-3, grid=None):
    """|H psi - (sum lam_i^2) psi| / |psi| by second-order central stencils,
    H = Laplacian - 2 sum_i e^{x_{i+1}-x_i}.  The quadrature grid windows
    are frozen at the center point so stencil differences see a smooth
    function of x."""
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    center = whittaker_quadrature(lam, x, grid)
    # re-evaluations at the stencil points keep the center's window and
    # node count so quadrature error varies smoothly with x and cancels in
    # the differences; the loose tolerance below only guards against a
    # frozen grid that has genuinely stopped resolving the integrand
    frozen = QuadSpec(nodes=center.meta.get("nodes", 161), rel_tol=1e-6,
                      max_refine=0, frozen=center.meta)

    def psi(z):
        return float(whittaker_quadrature(lam, z, frozen))

    f0 = float(center)
    lap = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        lap += (psi(x + e) - 2 * f0 + psi(x - e)) / (h * h)
    potential = 2.0 * float(np.sum(np.exp(x[1:] - x[:-1])))
    target = float(np.sum(lam * lam))
    return abs(lap - potential * f0 - target * f0) / abs(f0)


def conditional_kernel_k(n, x, y):
    """Unnormalized conditional-law kernels for the low-rank chains.

    n=2: k(x, y) = exp(-e^{x_2 - y_1} - e^{y_1 - x_1}).
    n=3: k(x, y) = 2 K_0(2 e^{(b-a)/2}) with
         e^{-a} = e^{x_3 - y_1 - y_2} + e^{-x_1},
         e^{ b} = e^{y_1} + e^{y_2} + e^{y_1 + y_2 - x_2} + e^{x_2}.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n == 2:
        if x.size != 2 or y.size != 1:
            raise ValueError("n=2 expects |x|=2, |y|=1")
        return math.exp(-math.exp(x[1] - y[0]) - math.exp(y[0] - x[0]))
    if n == 3:
        if x.size != 3 or y.size != 2:
            raise ValueError("n=3 expects |x|=3, |y|=2")
        from .specfun import macdonald_K
        neg_a = math.log(math.exp(x[2] - y[0] - y[1]) + math.exp(-x[0]))
        b = math.log(math.exp(y[0]) + math.exp(y[1])
                     + math.exp(y[0] + y[1] - x[1]) + math.exp(x[1]))
        z = 2.0 * math.exp((b + neg_a) / 2.0)
        return 2.0 * macdonald_K(0.0, z)
    raise ValueError("conditional kernels implemented for n in {2, 3}")
