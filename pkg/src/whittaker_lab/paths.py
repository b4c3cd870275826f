"""Path transforms, interacting SDE systems, and path-space checks.

This module houses the probabilistic side of the package: a
Pitman-type exponential path transform and its compositions, the
triangular interacting SDE array whose rows reproduce those transforms,
the lowest-row particle system, positive-coordinate (Lusztig) dynamics,
Feynman-Kac and exit-probability representations of the Whittaker
function, the log-gamma polymer partition function, and Monte Carlo
checks of the fixed-time laws and Laplace transforms against the
special-function routes in :mod:`whittaker_lab.specfun`.

Conventions used throughout:

* A path is a finite sample on a grid ``t_0 < t_1 < ... < t_M`` with
  values in ``R^n`` (:class:`SampledPath`).
* The open chamber is ``x_1 > x_2 > ... > x_n``; simple roots act on a
  vector by ``alpha_i(x) = x_i - x_{i+1}``.
* The single-letter transform is
  ``(T_i eta)(t) = eta(t) + log(int_0^t exp(-alpha_i(eta(s))) ds) * alpha_i``
  and words act leftmost letter first:
  ``T_w = T_{i_r} o ... o T_{i_1}`` for ``w = (i_1, ..., i_r)``.
* All stochastic routines take an explicit ``rng_seed`` and are
  deterministic given it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sc

from . import specfun
from ._parallel import shard_map
from ._stats import GoodnessOfFit, chi_square_counts, ks_pvalue
from .givental import WhittakerEval
from .gtpoly import TriangularArray

__all__ = [
    "SampledPath",
    "ArrayProcessState",
    "ArrayTrajectory",
    "LusztigState",
    "LusztigTrajectory",
    "XiTrajectory",
    "ExitEstimate",
    "FreeEnergyTable",
    "LaplaceCheck",
    "BlowupError",
    "in_chamber",
    "first_exit_index",
    "canonical_w0_word",
    "word_letters",
    "is_reduced_word",
    "brownian_sample",
    "transform_Ti",
    "transform_Tw",
    "transform_sequence",
    "simulate_array",
    "particle_system_xi",
    "lusztig_dynamics",
    "lusztig_thetas",
    "g_theta_cdf",
    "feynman_kac_psi",
    "exit_probability",
    "polymer_partition",
    "free_energy_estimate",
    "law_check_nu_t",
    "laplace_transform_check",
    "matsumoto_yor_check",
]

_BLOWUP_GUARD = 1.0e6


class BlowupError(RuntimeError):
    """An SDE integration left the trusted range and was aborted."""

    def __init__(self, message, time=None, magnitude=None):
        super().__init__(message)
        self.time = time
        self.magnitude = magnitude


# ---------------------------------------------------------------------------
# sampled paths
# ---------------------------------------------------------------------------


@dataclass
class SampledPath:
    """A piecewise-linear path on a strictly increasing time grid.

    ``values`` has shape ``(len(times), n)``; row ``k`` is the position
    at ``times[k]``.  ``drift`` is optional metadata recording the drift
    vector the path was sampled with (transforms pass it through).
    """

    times: np.ndarray
    values: np.ndarray
    drift: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or self.times.size < 2:
            raise ValueError("need at least two grid times")
        if self.values.shape[0] != self.times.size:
            raise ValueError("times and values lengths disagree")
        if not np.all(np.isfinite(self.times)):
            raise ValueError("grid times must be finite")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("grid times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")
        if self.drift is not None:
            self.drift = np.asarray(self.drift, dtype=float)

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def t_max(self):
        return float(self.times[-1])

    def final(self):
        return self.values[-1].copy()

    def component(self, i):
        """1-based coordinate ``eta^i`` as a flat array."""
        return self.values[:, i - 1]

    def up_to(self, t, tol=1e-9):
        """Restriction to grid times ``<= t`` (t must hit the grid)."""
        idx = int(np.searchsorted(self.times, t - tol, side="left"))
        if idx >= self.times.size or abs(self.times[idx] - t) > tol:
            raise ValueError(f"t={t} is not a grid time")
        return SampledPath(self.times[: idx + 1].copy(),
                           self.values[: idx + 1].copy(), self.drift)

    def subsample(self, step):
        """Keep every ``step``-th grid point (endpoint included)."""
        if (self.times.size - 1) % step != 0:
            raise ValueError("step must divide the number of grid cells")
        return SampledPath(self.times[::step].copy(),
                           self.values[::step].copy(), self.drift)


def in_chamber(x, strict=True):
    """True when ``x_1 > x_2 > ... > x_n`` (``>=`` if strict=False)."""
    x = np.asarray(x, dtype=float)
    d = np.diff(x)
    return bool(np.all(d < 0) if strict else np.all(d <= 0))


def first_exit_index(path):
    """First grid index at which the path leaves the open chamber.

    Returns None when the path stays ordered at every grid time.
    Detection is grid-only: excursions between grid points are not
    seen, which biases any exit time estimate upward.
    """
    d = np.diff(path.values, axis=1)
    bad = np.any(d >= 0, axis=1)
    hits = np.nonzero(bad)[0]
    return int(hits[0]) if hits.size else None


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------


def word_letters(word):
    """Normalise a word to a list of integer letters.

    Accepts a plain iterable of 1-based letters or any object exposing
    a ``letters`` attribute (duck-typed so the matrix-cell layer can
    pass its richer word objects straight through).
    """
    if hasattr(word, "letters"):
        word = word.letters
    letters = [int(i) for i in word]
    if any(i < 1 for i in letters):
        raise ValueError("letters are 1-based positive integers")
    return letters


def is_reduced_word(letters, n):
    """True when the word is reduced (length equals inversion count)."""
    perm = list(range(n))
    for i in letters:
        if i >= n:
            raise ValueError(f"letter {i} out of range for n={n}")
        perm[i - 1], perm[i] = perm[i], perm[i - 1]
    inv = sum(perm[a] > perm[b]
              for a in range(n) for b in range(a + 1, n))
    return inv == len(letters)


def canonical_w0_word(n):
    """Canonical reduced word for the longest element: (1)(21)(321)...

    For n=3 this is (1, 2, 1); the length is n(n-1)/2.
    """
    letters = []
    for k in range(1, n):
        letters.extend(range(k, 0, -1))
    return letters


def _is_longest_word(letters, n):
    if len(letters) != n * (n - 1) // 2:
        return False
    perm = list(range(n))
    for i in letters:
        perm[i - 1], perm[i] = perm[i], perm[i - 1]
    return perm == list(range(n - 1, -1, -1))


# ---------------------------------------------------------------------------
# Brownian sampling
# ---------------------------------------------------------------------------


def brownian_sample(n, mu, t_max, dt, rng_seed=0):
    """Sample a standard n-dimensional Brownian path with drift ``mu``.

    The grid is uniform with step ``dt`` ending at ``t_max`` (the last
    cell is shortened if ``dt`` does not divide ``t_max`` exactly).
    Increments over a cell of width h are independent Gaussians with
    mean ``mu * h`` and variance ``h`` per coordinate.  Deterministic
    for a fixed ``rng_seed``.
    """
    if t_max <= 0 or dt <= 0:
        raise ValueError("t_max and dt must be positive")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
    steps = int(math.ceil(t_max / dt - 1e-12))
    times = np.minimum(dt * np.arange(steps + 1), t_max)
    h = np.diff(times)
    rng = np.random.default_rng(rng_seed)
    inc = rng.standard_normal((steps, n)) * np.sqrt(h)[:, None] \
        + mu[None, :] * h[:, None]
    values = np.vstack([np.zeros((1, n)), np.cumsum(inc, axis=0)])
    return SampledPath(times, values, drift=mu)


# ---------------------------------------------------------------------------
# exponential path transforms
# ---------------------------------------------------------------------------


def _log_linear_cell(u):
    """log((1 - exp(-u)) / u), the exact log-integral of exp(-linear).

    Stable for all real u; equals 0 at u = 0.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-8
    pos = (u >= 1e-8)
    neg = (u <= -1e-8)
    out[small] = np.log1p(-u[small] / 2.0 + u[small] ** 2 / 12.0)
    up = u[pos]
    out[pos] = np.log(-np.expm1(-up)) - np.log(up)
    un = u[neg]
    out[neg] = -un + np.log(-np.expm1(un)) - np.log(-un)
    return out


def _log_cell_integrals(a, h, method):
    """Per-cell values of log int_{t_k}^{t_{k+1}} exp(-a(s)) ds.

    ``a`` is the sampled integrand exponent; ``method`` chooses between
    the trapezoid rule and the exact integral of the piecewise-linear
    interpolant of ``a`` (exp-of-linear cells).
    """
    a0, a1 = a[:-1], a[1:]
    if method == "trapezoid":
        return np.log(h / 2.0) + np.logaddexp(-a0, -a1)
    if method == "exact":
        return -a0 + np.log(h) + _log_linear_cell(a1 - a0)
    raise ValueError(f"unknown integration method {method!r}")


def transform_Ti(eta, i, method="trapezoid"):
    """Single-letter exponential transform of a sampled path.

    Computes ``eta(t) + log(int_0^t exp(eta_{i+1}(s) - eta_i(s)) ds)``
    added to coordinates i (plus) and i+1 (minus), on the grid
    ``t_1, ..., t_M``: the first grid point is dropped because the
    running integral vanishes at the path's initial time and its
    logarithm is -inf there.

    ``method="trapezoid"`` uses the trapezoid rule on the exponential
    integrand (all in log space, so large exponents cannot overflow);
    ``method="exact"`` integrates the piecewise-linear interpolant of
    the exponent exactly, which is the right oracle for deterministic
    piecewise-linear test paths.
    """
    if not 1 <= i <= eta.n - 1:
        raise ValueError(f"letter {i} out of range for n={eta.n}")
    a = eta.values[:, i - 1] - eta.values[:, i]
    h = np.diff(eta.times)
    log_cells = _log_cell_integrals(a, h, method)
    log_integral = np.logaddexp.accumulate(log_cells)
    out = eta.values[1:].copy()
    out[:, i - 1] += log_integral
    out[:, i] -= log_integral
    return SampledPath(eta.times[1:].copy(), out, eta.drift)


def transform_sequence(eta, word, method="trapezoid"):
    """Apply the letters of ``word`` one at a time, keeping the record.

    Returns ``(stages, log_integrals)`` where ``stages[k]`` is the path
    after the first k letters (``stages[0] is eta``) and
    ``log_integrals[k-1]`` is the final-time value of the log running
    integral produced by letter k — exactly the positive-coordinate
    data the matrix-cell layer consumes.
    """
    letters = word_letters(word)
    if not is_reduced_word(letters, eta.n):
        raise ValueError("word is not reduced; composite transforms are "
                         "only defined along reduced words")
    if eta.times.size - len(letters) < 2:
        raise ValueError("grid too coarse for this word length")
    stages = [eta]
    log_integrals = []
    current = eta
    for i in letters:
        a = current.values[:, i - 1] - current.values[:, i]
        h = np.diff(current.times)
        log_cells = _log_cell_integrals(a, h, method)
        log_integral = np.logaddexp.accumulate(log_cells)
        out = current.values[1:].copy()
        out[:, i - 1] += log_integral
        out[:, i] -= log_integral
        current = SampledPath(current.times[1:].copy(), out, current.drift)
        stages.append(current)
        log_integrals.append(float(log_integral[-1]))
    return stages, log_integrals


def transform_Tw(eta, word, method="trapezoid"):
    """Composite transform along a reduced word (first letter first)."""
    stages, _ = transform_sequence(eta, word, method=method)
    return stages[-1]


# ---------------------------------------------------------------------------
# triangular array SDE
# ---------------------------------------------------------------------------


@dataclass
class ArrayProcessState:
    """Triangular array value at a fixed time."""

    array: TriangularArray
    time: float


@dataclass
class ArrayTrajectory:
    """Stored Euler trajectory of the triangular interacting array.

    ``flat`` has one row per stored time, concatenating array rows
    top-down: (T_{1,1}, T_{2,1}, T_{2,2}, T_{3,1}, ...).
    """

    times: np.ndarray
    flat: np.ndarray
    n: int
    driving: SampledPath

    def __len__(self):
        return self.times.size

    def _slices(self):
        out, start = [], 0
        for k in range(1, self.n + 1):
            out.append(slice(start, start + k))
            start += k
        return out

    def row_values(self, k):
        """Time series of row k, shape (len(self), k)."""
        return self.flat[:, self._slices()[k - 1]]

    def state(self, idx):
        sl = self._slices()
        rows = [self.flat[idx, s].tolist() for s in sl]
        return ArrayProcessState(TriangularArray(rows),
                                 float(self.times[idx]))

    def final_state(self):
        return self.state(len(self) - 1)

    def row_sums(self):
        """Sum over each full row at each stored time, shape (K, n)."""
        sl = self._slices()
        return np.stack([self.flat[:, s].sum(axis=1) for s in sl], axis=1)


def simulate_array(mu, t_max, dt, rng_seed=0, t_init=None, driving=None):
    """Euler scheme for the triangular interacting SDE array.

    Row 1 is the first driving coordinate; for k >= 2 the increments
    cascade down the rows:

        dT_{k,1} = dT_{k-1,1} + exp(T_{k,2} - T_{k-1,1}) dt
        dT_{k,j} = dT_{k-1,j} + (exp(T_{k,j+1} - T_{k-1,j})
                                 - exp(T_{k,j}   - T_{k-1,j-1})) dt
        dT_{k,k} = d(eta^k)   -  exp(T_{k,k}   - T_{k-1,k-1}) dt

    where the T_{k,.} values on the right are those *after* the row-k
    update of the current step and the T_{k-1,.} values are the
    already-updated row above (the scheme sweeps rows top-down within a
    step, matching the triangular structure of the system).

    The transform identity T_{k,.}(t) = (T_{w_0^{(k)}} (eta^1..eta^k))(t)
    fails at t = 0 (log of a vanishing integral), so the array is
    initialised at a warm-start time ``t_init`` (default: a few grid
    steps, at least 0.05) from the transform route and integrated
    onward.  Aborts with :class:`BlowupError` once any entry exceeds
    1e6 in magnitude.

    Returns an :class:`ArrayTrajectory` carrying the stored states and
    the driving path.
    """
    if driving is None:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        n = mu.size
        eta = brownian_sample(n, mu, t_max, dt, rng_seed)
    else:
        eta = driving
        n = eta.n
        dt = float(np.median(np.diff(eta.times)))
    q = n * (n - 1) // 2
    if t_init is None:
        t_init = max(0.05, (q + 5) * dt)
    k0 = int(np.searchsorted(eta.times, t_init - 1e-12))
    k0 = max(k0, q + 2)
    if k0 >= eta.times.size - 1 and n > 1:
        raise ValueError("t_init leaves no room to integrate; "
                         "reduce dt or extend t_max")
    k0 = min(k0, eta.times.size - 1)

    # warm start: rows from the composite transform of the driving path
    rows = []
    for k in range(1, n + 1):
        sub = SampledPath(eta.times[: k0 + 1].copy(),
                          eta.values[: k0 + 1, :k].copy())
        if k == 1:
            rows.append(np.array([sub.values[-1, 0]]))
        else:
            final = transform_Tw(sub, canonical_w0_word(k)).final()
            rows.append(final)

    steps = eta.times.size - 1
    stored = np.empty((steps - k0 + 1, q + n))
    stored[0] = np.concatenate(rows)
    d_eta = np.diff(eta.values, axis=0)
    for m in range(k0, steps):
        h = eta.times[m + 1] - eta.times[m]
        # all drift coefficients at the current time, increments
        # cascading down the rows (row k re-uses row k-1's increment)
        incs = [np.array([d_eta[m, 0]])]
        for k in range(2, n + 1):
            row, above = rows[k - 1], rows[k - 2]
            edge = np.exp(row[1:] - above) * h     # j = 1..k-1
            inc = np.empty(k)
            inc[: k - 1] = incs[k - 2]
            inc[0] += edge[0]
            if k > 2:
                inc[1: k - 1] += edge[1:] - edge[: k - 2]
            inc[k - 1] = d_eta[m, k - 1] - edge[k - 2]
            incs.append(inc)
        for k in range(n):
            rows[k] = rows[k] + incs[k]
        stored[m - k0 + 1] = np.concatenate(rows)
        peak = np.abs(stored[m - k0 + 1]).max()
        if peak > _BLOWUP_GUARD:
            raise BlowupError(
                f"array entry reached {peak:.3e} at t={eta.times[m + 1]:.6g}"
                f" (guard {_BLOWUP_GUARD:.0e}); decrease dt or t_max",
                time=float(eta.times[m + 1]), magnitude=float(peak))
    return ArrayTrajectory(eta.times[k0:].copy(), stored, n, eta)


# ---------------------------------------------------------------------------
# lowest-row particle system
# ---------------------------------------------------------------------------


@dataclass
class XiTrajectory:
    """Stored trajectory of the one-sided reflected particle system.

    ``values`` has shape ``(K, replicas, n)``; ``eta_sum`` stores the
    coordinate sum of the driving noise per replica so conservation of
    ``sum(xi) - sum(eta)`` can be checked exactly at grid level.
    """

    times: np.ndarray
    values: np.ndarray
    eta_sum: np.ndarray
    drift: np.ndarray
    interaction: bool

    @property
    def replicas(self):
        return self.values.shape[1]

    @property
    def n(self):
        return self.values.shape[2]

    def final(self):
        return self.values[-1]


def particle_system_xi(mu, t_max, dt, rng_seed=0, replicas=1,
                       interaction=True, store_every=1, xi0=None,
                       driving=None):
    """Euler scheme for ``d xi_k = d eta^k - exp(xi_k - xi_{k-1}) dt``.

    The first particle is free; each later one is pushed down when it
    approaches the previous from below (note ``xi_k < xi_{k-1}`` makes
    the push small: the stationary gap law has positive mean for drifts
    in the decreasing chamber).  With ``interaction=False`` the
    particles are independent driftful Brownian motions — useful as a
    null route.  ``replicas`` independent copies run vectorised in one
    pass; replica r uses the same scheme with its own noise column.

    ``driving`` may inject a prepared :class:`SampledPath` (replicas
    must then be 1); otherwise noise is drawn from ``rng_seed``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = mu.size
    if driving is not None:
        if replicas != 1:
            raise ValueError("driving injection requires replicas=1")
        times = driving.times
        d_eta = np.diff(driving.values, axis=0)[:, None, :]
    else:
        steps = int(math.ceil(t_max / dt - 1e-12))
        times = np.minimum(dt * np.arange(steps + 1), t_max)
        rng = np.random.default_rng(rng_seed)
        d_eta = None
    steps = times.size - 1
    xi = np.zeros((replicas, n))
    if xi0 is not None:
        xi[:] = np.asarray(xi0, dtype=float)
    esum = np.zeros(replicas)
    keep = list(range(0, steps + 1, store_every))
    if keep[-1] != steps:
        keep.append(steps)
    keep_set = set(keep)
    out_vals = np.empty((len(keep), replicas, n))
    out_esum = np.empty((len(keep), replicas))
    out_vals[0], out_esum[0] = xi, esum
    pos = 1
    h_all = np.diff(times)
    for m in range(steps):
        h = h_all[m]
        if d_eta is None:
            step_eta = rng.standard_normal((replicas, n)) * math.sqrt(h) \
                + mu[None, :] * h
        else:
            step_eta = d_eta[m]
        xi = xi + step_eta
        if interaction and n > 1:
            push = np.exp(xi[:, 1:] - xi[:, :-1]) * h
            xi[:, 1:] -= push
        esum = esum + step_eta.sum(axis=1)
        if m + 1 in keep_set:
            out_vals[pos], out_esum[pos] = xi, esum
            pos += 1
        peak = np.abs(xi).max()
        if peak > _BLOWUP_GUARD:
            raise BlowupError(
                f"particle reached {peak:.3e} at t={times[m + 1]:.6g}",
                time=float(times[m + 1]), magnitude=float(peak))
    return XiTrajectory(times[keep], out_vals, out_esum, mu,
                        bool(interaction))


# ---------------------------------------------------------------------------
# positive-coordinate (Lusztig) dynamics
# ---------------------------------------------------------------------------


def _roots_along_word(letters, n):
    """Positive roots beta_k = s_{i_1}..s_{i_{k-1}} alpha_{i_k}.

    Returned as an array of shape (len(letters), n) of coordinate
    vectors; along a reduced word for the longest element these
    enumerate every difference e_i - e_j with i < j exactly once.
    """
    out = np.zeros((len(letters), n))
    perm = np.arange(n)
    for k, i in enumerate(letters):
        alpha = np.zeros(n)
        alpha[i - 1], alpha[i] = 1.0, -1.0
        # apply s_{i_1}..s_{i_{k-1}} to alpha: permute coordinates
        out[k, perm] = alpha
        perm[i - 1], perm[i] = perm[i].copy(), perm[i - 1].copy()
    return out


def lusztig_thetas(mu, word):
    """Rate parameters theta_k = -beta_k(mu) for the y-coordinates.

    For a reduced word of the longest element these are exactly the
    pairwise differences {mu_j - mu_i : i < j}, all positive when mu is
    strictly increasing.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    letters = word_letters(word)
    if not is_reduced_word(letters, mu.size):
        raise ValueError("word is not reduced")
    roots = _roots_along_word(letters, mu.size)
    return -(roots @ mu)


@dataclass
class LusztigState:
    """Positive-coordinate state: y_k = -log of the k-th cell coordinate."""

    y: np.ndarray
    word: tuple
    time: float


@dataclass
class LusztigTrajectory:
    times: np.ndarray
    ys: np.ndarray          # (K, replicas, q)
    growth: np.ndarray      # (K, replicas, q): the nondecreasing x_k
    letters: tuple
    thetas: np.ndarray
    drift: np.ndarray

    @property
    def replicas(self):
        return self.ys.shape[1]

    def state(self, idx, replica=0):
        return LusztigState(self.ys[idx, replica].copy(),
                            tuple(self.letters), float(self.times[idx]))

    def final(self):
        return self.ys[-1]


def lusztig_dynamics(mu, word, t_max, dt, rng_seed=0, replicas=1,
                     store_every=1, y0=None, driving=None):
    """Euler scheme for the log positive-coordinate system along a word.

    With letters (i_1, ..., i_q) the coordinates solve

        dy_k = d alpha_{i_k}(eta)
               + sum_{j<k} alpha_{i_k}(alpha_{i_j}) exp(-y_j) dt
               + exp(-y_k) dt,

    where alpha_a(alpha_b) = 2*delta_{ab} - [|a-b| = 1] is the Cartan
    pairing for the A-type root system.  The companion coordinates
    ``x_k`` satisfy ``dx_k = exp(-y_k) dt`` and are nondecreasing; they
    are stored as ``growth``.

    When every theta_k = -beta_k(mu) is positive the y-vector is
    positive recurrent with product stationary law whose k-th marginal
    has density g(x) = exp(-theta_k x - exp(-x)) / Gamma(theta_k); for
    stationarity sampling use many replicas and read one final state
    from each (independent by construction).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = mu.size
    letters = word_letters(word)
    if not is_reduced_word(letters, n):
        raise ValueError("word is not reduced")
    q = len(letters)
    thetas = lusztig_thetas(mu, letters)

    idx = np.asarray(letters, dtype=int) - 1
    pair = np.zeros((q, q))
    for k in range(q):
        for j in range(k):
            a, b = letters[k], letters[j]
            pair[k, j] = 2.0 if a == b else (-1.0 if abs(a - b) == 1 else 0.0)
    np.fill_diagonal(pair, 1.0)      # the extra exp(-y_k) self term

    if driving is not None:
        if replicas != 1:
            raise ValueError("driving injection requires replicas=1")
        times = driving.times
        d_eta_all = np.diff(driving.values, axis=0)[:, None, :]
    else:
        steps = int(math.ceil(t_max / dt - 1e-12))
        times = np.minimum(dt * np.arange(steps + 1), t_max)
        rng = np.random.default_rng(rng_seed)
        d_eta_all = None
    steps = times.size - 1
    h_all = np.diff(times)

    y = np.zeros((replicas, q))
    if y0 is not None:
        y[:] = np.asarray(y0, dtype=float)
    gx = np.zeros((replicas, q))   # the nondecreasing companions x_k

    keep = list(range(0, steps + 1, store_every))
    if keep[-1] != steps:
        keep.append(steps)
    keep_set = set(keep)
    out_y = np.empty((len(keep), replicas, q))
    out_g = np.empty((len(keep), replicas, q))
    out_y[0], out_g[0] = y, gx
    pos = 1
    for m in range(steps):
        h = h_all[m]
        if d_eta_all is None:
            d_eta = rng.standard_normal((replicas, n)) * math.sqrt(h) \
                + mu[None, :] * h
        else:
            d_eta = d_eta_all[m]
        d_alpha = d_eta[:, idx] - d_eta[:, idx + 1]
        e_term = np.exp(-y)
        y = y + d_alpha + (e_term @ pair.T) * h
        gx = gx + e_term * h
        if m + 1 in keep_set:
            out_y[pos], out_g[pos] = y, gx
            pos += 1
        peak = np.abs(y).max()
        if peak > _BLOWUP_GUARD:
            raise BlowupError(
                f"coordinate reached {peak:.3e} at t={times[m + 1]:.6g}",
                time=float(times[m + 1]), magnitude=float(peak))
    return LusztigTrajectory(times[keep], out_y, out_g, tuple(letters),
                             thetas, mu)


def g_theta_cdf(x, theta):
    """CDF of the law with density exp(-theta*x - exp(-x))/Gamma(theta).

    This is the log of an inverse-gamma variable; the CDF is the
    regularised upper incomplete gamma function at exp(-x).
    """
    x = np.asarray(x, dtype=float)
    return _sc.gammaincc(theta, np.exp(-x))


# ---------------------------------------------------------------------------
# Feynman-Kac representation
# ---------------------------------------------------------------------------


def feynman_kac_psi(lam, x, horizon, paths=20000, dt=0.005, rng_seed=0):
    """Monte Carlo evaluation of the Whittaker function via killing.

    Averages ``exp(-sum_i int_0^horizon exp(x_{i+1}(s) - x_i(s)) ds)``
    over Brownian paths started at ``x`` with drift ``lam``, then
    multiplies by ``exp(lam . x)`` and by ``Gamma(lam_i - lam_j)`` over
    all pairs i < j.  Requires ``lam`` strictly decreasing.

    Truncating the time integral at ``horizon`` biases the estimate
    *upward*; when every consecutive gap ``lam_i - lam_{i+1}`` exceeds
    1 the bias of the path-average weight is bounded by

        sum_i exp(x_{i+1} - x_i) * exp(-(gap_i - 1) * horizon) / (gap_i - 1)

    reported in ``meta['tail_bound']`` (infinite when some gap is
    <= 1); multiply by the Gamma/exponential prefactor — stored as
    ``meta['prefactor']`` — for an absolute bound on the returned
    value.  The returned ``est_error`` is the purely statistical
    standard error.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = lam.size
    if x.size != n:
        raise ValueError("lam and x must have the same length")
    if n == 1:
        value = math.exp(lam[0] * x[0])
        return WhittakerEval(value, 0.0, "feynman_kac",
                             meta={"paths": 0, "tail_bound": 0.0,
                                   "exact": True})
    pair_gaps = [lam[i] - lam[j] for i in range(n) for j in range(i + 1, n)]
    if min(pair_gaps) <= 0:
        raise ValueError("lam must be strictly decreasing (open chamber)")
    log_scale = float(lam @ x) + sum(math.lgamma(g) for g in pair_gaps)

    cons = -np.diff(lam)             # consecutive gaps lam_i - lam_{i+1}
    tail = 0.0
    for i in range(n - 1):
        g = cons[i]
        if g <= 1.0:
            tail = math.inf
            break
        tail += math.exp(-(x[i] - x[i + 1])) \
            * math.exp(-(g - 1.0) * horizon) / (g - 1.0)

    steps = int(math.ceil(horizon / dt - 1e-12))
    shards = 16
    counts = [paths // shards + (1 if s < paths % shards else 0)
              for s in range(shards)]

    def one_shard(s):
        r = counts[s]
        if r == 0:
            return (0.0, 0.0, 0)
        rng = np.random.default_rng([rng_seed, s])
        beta = np.tile(x, (r, 1))
        f = np.exp(np.diff(beta, axis=1)).sum(axis=1)
        acc = np.zeros(r)
        sq = math.sqrt(dt)
        for _ in range(steps):
            beta += rng.standard_normal((r, n)) * sq + lam * dt
            fn = np.exp(np.diff(beta, axis=1)).sum(axis=1)
            acc += 0.5 * (f + fn) * dt
            f = fn
        w = np.exp(-acc)
        return (float(w.sum()), float((w * w).sum()), r)

    parts = shard_map(one_shard, shards)
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    sem = math.sqrt(var / count)
    scale = math.exp(log_scale)
    return WhittakerEval(scale * mean, scale * sem, "feynman_kac",
                         meta={"paths": count, "dt": dt, "horizon": horizon,
                               "tail_bound": tail, "prefactor": scale,
                               "mean_weight": mean,
                               "bias": "upward (truncated horizon)"})


# ---------------------------------------------------------------------------
# exit probability
# ---------------------------------------------------------------------------


class ExitEstimate(float):
    """A float (the survival probability) carrying its error metadata."""

    def __new__(cls, value, stderr, paths, horizon, dt):
        obj = super().__new__(cls, value)
        obj.stderr = stderr
        obj.paths = paths
        obj.horizon = horizon
        obj.dt = dt
        obj.bias = ("upward: exits between grid points are missed and "
                    "paths surviving to the horizon count as never "
                    "exiting")
        return obj


def exit_probability(lam, x, horizon=50.0, paths=100000, dt=0.001,
                     rng_seed=0):
    """P(drifted Brownian motion never leaves the open chamber).

    Simulates Brownian paths with drift ``lam`` from ``x`` and reports
    the fraction still strictly ordered at every grid time up to
    ``horizon``.  The target identity is

        P = h(lam) * exp(-lam . x) * J_lam(x)

    with ``h`` the Vandermonde and ``J`` the degenerate (HCIZ-type)
    limit of the Whittaker function; the Monte Carlo estimate is biased
    upward for two reasons recorded on the result: exit detection is
    grid-only, and the horizon is finite.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = lam.size
    if not in_chamber(lam) or not in_chamber(x):
        raise ValueError("lam and x must lie in the open chamber")
    steps = int(math.ceil(horizon / dt - 1e-12))
    shards = 16
    counts = [paths // shards + (1 if s < paths % shards else 0)
              for s in range(shards)]

    def one_shard(s):
        r = counts[s]
        if r == 0:
            return 0
        rng = np.random.default_rng([rng_seed, s])
        beta = np.tile(x, (r, 1))
        sq = math.sqrt(dt)
        for _ in range(steps):
            beta += rng.standard_normal((beta.shape[0], n)) * sq + lam * dt
            ok = np.all(beta[:, :-1] > beta[:, 1:], axis=1)
            if not ok.all():
                beta = beta[ok]
                if beta.shape[0] == 0:
                    return 0
        return beta.shape[0]

    alive = sum(shard_map(one_shard, shards))
    p_hat = alive / paths
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / paths)
    return ExitEstimate(p_hat, se, paths, horizon, dt)


# ---------------------------------------------------------------------------
# polymer partition function
# ---------------------------------------------------------------------------


def polymer_partition(n, t, dt=0.001, rng_seed=0, return_driving=False):
    """Point-to-point continuum polymer free energy at time t, size n.

    Samples n independent driftless Brownian motions B_1..B_n, feeds
    the reversed vector (B_n, ..., B_1) through the longest-word
    transform, and returns ``(log_Z, X)`` where ``X`` is the full
    transformed vector at time t and ``log_Z = X_1`` is the log
    partition function of the n-line continuum polymer.  For n = 1
    the word is empty and log_Z = B_1(t).

    With ``return_driving=True`` the Brownian path (in the original
    B_1..B_n order) is returned as a third element.
    """
    bm = brownian_sample(n, 0.0, t, dt, rng_seed)
    eta = SampledPath(bm.times, bm.values[:, ::-1].copy())
    if n == 1:
        X = eta.final()
    else:
        X = transform_Tw(eta, canonical_w0_word(n)).final()
    if return_driving:
        return float(X[0]), X, bm
    return float(X[0]), X


def _golden_min(f, lo, hi, tol=1e-10):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


@dataclass
class FreeEnergyTable:
    """Simulated polymer free energies against the variational constant."""

    rows: list
    constant: float
    t_star: float
    stationarity_residual: float

    def __iter__(self):
        return iter(self.rows)


def free_energy_estimate(n_values=(4, 8, 16, 32), reps=24, dt=0.001,
                         rng_seed=0):
    """Estimate (1/n) log Z_n(t=n) and compare with its n->infinity limit.

    The limiting constant is inf over t > 0 of ``t - Psi(t)`` with Psi
    the digamma function, located by golden-section search; the report
    includes the stationarity residual |d/dt (t - Psi(t))| at the
    minimiser (Psi'(t*) should equal 1) measured by central finite
    difference.  Each table row gives the sample mean and standard
    error of (1/n) log Z_n over ``reps`` independent replicates.
    """
    f = lambda t: t - specfun.digamma(t)
    t_star, constant = _golden_min(f, 0.25, 4.0, tol=1e-7)
    # value-based search cannot place the minimiser of a flat quadratic
    # better than ~sqrt(eps); polish by bisecting the central-difference
    # slope, whose h is wide enough that rounding stays below truncation
    h = 1e-4
    g = lambda t: (f(t + h) - f(t - h)) / (2 * h)
    lo, hi = t_star - 1e-3, t_star + 1e-3
    glo = g(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0 or hi - lo < 1e-13:
            lo = hi = mid
            break
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    constant = f(t_star)
    resid = abs(g(t_star))

    def one_case(args):
        nval, r = args
        logz, _ = polymer_partition(nval, float(nval), dt,
                                    rng_seed=[rng_seed, nval, r])
        return logz / nval

    rows = []
    for nval in n_values:
        jobs = [(nval, r) for r in range(reps)]
        vals = np.array(shard_map(lambda k: one_case(jobs[k]), len(jobs)))
        rows.append({"n": int(nval),
                     "mean": float(vals.mean()),
                     "sem": float(vals.std(ddof=1) / math.sqrt(reps)),
                     "reps": int(reps)})
    return FreeEnergyTable(rows, float(constant), float(t_star),
                           float(resid))


# ---------------------------------------------------------------------------
# fixed-time law of the transformed path (n = 2)
# ---------------------------------------------------------------------------


def law_check_nu_t(mu, t, paths=100000, dt=0.001, bins=20, rng_seed=0,
                   density_time=None):
    """Chi-square check of the fixed-time law of the transformed pair.

    Simulates the longest-word transform of a drifted planar Brownian
    path to time t and tests the sample against the density

        exp(-(mu_1^2 + mu_2^2) t / 2) * psi_mu(x) * theta_t(x)

    on a bins x bins grid (plus a pooled outside cell).  Also verifies
    that the predicted density integrates to 1 over a generous window
    and that the coordinate sum is Gaussian with mean (mu_1 + mu_2) t
    and variance 2t (exactly conserved by the transform).

    ``density_time`` overrides the time at which the reference density
    is evaluated (default: the simulation time ``t``).  Setting it to a
    different value is a sensitivity control: the mismatched reference
    is still a probability density, so the mass gate stays green while
    the chi-square collapses — useful for confirming the test has
    power.

    The predicted density is evaluated in rotated coordinates
    s = x_1 + x_2, g = x_1 - x_2 (Jacobian 1/2), where the theta
    factor separates into a Gaussian in s times a function of the gap,

        theta_t(x) = theta_t((g/2, -g/2)) * exp(-s^2 / (4 t)),

    so only the distinct gap values need the quadrature route.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.size != 2:
        raise ValueError("this law check is for n = 2")
    if not (0.5 - 1e-12 <= t <= 4.0 + 1e-12):
        raise ValueError("t should lie in [0.5, 4] for a stable check")
    t_d = t if density_time is None else float(density_time)
    if not (0.5 - 1e-12 <= t_d <= 4.0 + 1e-12):
        raise ValueError("density_time should lie in [0.5, 4]")
    steps = int(math.ceil(t / dt - 1e-12))
    h = t / steps
    rng = np.random.default_rng(rng_seed)
    R = paths
    b = np.zeros((R, 2))
    log_int = np.full(R, -np.inf)
    g_prev = b[:, 1] - b[:, 0]
    sq = math.sqrt(h)
    for _ in range(steps):
        b += rng.standard_normal((R, 2)) * sq + mu * h
        g_new = b[:, 1] - b[:, 0]
        cell = math.log(h / 2.0) + np.logaddexp(g_prev, g_new)
        log_int = np.logaddexp(log_int, cell)
        g_prev = g_new
    x1 = b[:, 0] + log_int
    x2 = b[:, 1] - log_int

    s_mean = (mu[0] + mu[1]) * t
    s_sd = math.sqrt(2.0 * t)
    s_samples = x1 + x2
    g_samples = x1 - x2
    # bin window: central quantiles padded a little
    s_lo, s_hi = s_mean - 4.0 * s_sd, s_mean + 4.0 * s_sd
    g_lo, g_hi = np.quantile(g_samples, [0.002, 0.998])
    g_lo, g_hi = float(g_lo) - 0.25, float(g_hi) + 0.25
    s_edges = np.linspace(s_lo, s_hi, bins + 1)
    g_edges = np.linspace(g_lo, g_hi, bins + 1)
    counts, _, _ = np.histogram2d(s_samples, g_samples,
                                  bins=[s_edges, g_edges])

    # predicted probabilities per bin, by midpoint quadrature on a
    # sub-grid; density in (s, g) coordinates carries Jacobian 1/2
    sub = 3
    s_cent = (np.linspace(0, 1, sub, endpoint=False) + 0.5 / sub)
    s_nodes = s_edges[:-1, None] + np.diff(s_edges)[:, None] * s_cent
    g_nodes = g_edges[:-1, None] + np.diff(g_edges)[:, None] * s_cent
    s_flat = s_nodes.ravel()
    g_flat = g_nodes.ravel()

    uniq_g, inv = np.unique(np.round(g_flat, 12), return_inverse=True)
    theta_gap = np.array([
        specfun.theta_density(t_d, (g / 2.0, -g / 2.0), rel_tol=1e-8,
                              form="psi")
        for g in uniq_g])
    psi_gap = np.array([
        2.0 * specfun.macdonald_K(mu[0] - mu[1], 2.0 * math.exp(-g / 2.0))
        for g in uniq_g])
    prefac = math.exp(-0.5 * (mu[0] ** 2 + mu[1] ** 2) * t_d)
    theta_vals = theta_gap[inv]
    psi_vals = psi_gap[inv]

    def cell_probs():
        ds = np.diff(s_edges) / sub
        dg = np.diff(g_edges) / sub
        p = np.zeros((bins, bins))
        e_s = np.exp(0.5 * (mu[0] + mu[1]) * s_flat
                     - s_flat ** 2 / (4.0 * t_d))
        f_g = psi_vals * theta_vals
        for a in range(bins):
            si = e_s[a * sub:(a + 1) * sub] * ds[a]
            for c in range(bins):
                gi = f_g[c * sub:(c + 1) * sub] * dg[c]
                p[a, c] = si.sum() * gi.sum()
        return 0.5 * prefac * p

    probs = cell_probs()
    total_mass_window = probs.sum()

    # full-mass check on a wide window
    wide_g = np.linspace(g_lo - 4.0, g_hi + 6.0, 481)
    wide_theta = np.array([
        specfun.theta_density(t_d, (g / 2.0, -g / 2.0), rel_tol=1e-8,
                              form="psi")
        for g in wide_g])
    wide_psi = np.array([
        2.0 * specfun.macdonald_K(mu[0] - mu[1], 2.0 * math.exp(-g / 2.0))
        for g in wide_g])
    gap_integral = np.trapezoid(wide_theta * wide_psi, wide_g)
    s_integral = math.sqrt(4.0 * math.pi * t_d) \
        * math.exp(t_d * (mu[0] + mu[1]) ** 2 / 4.0)
    mass = 0.5 * prefac * gap_integral * s_integral

    stat, df, p_value, cells = chi_square_counts(counts, probs, total=R)

    sum_err = abs(s_samples.mean() - s_mean) / (s_sd / math.sqrt(R))
    var_ratio = s_samples.var(ddof=1) / (2.0 * t)
    var_sd = math.sqrt(2.0 / (R - 1))
    passed = (p_value > 0.001 and abs(mass - 1.0) < 1e-3
              and sum_err < 3.0 and abs(var_ratio - 1.0) < 3.0 * var_sd)
    return GoodnessOfFit(
        name="fixed-time-law",
        statistic=float(stat), p_value=float(p_value), passed=bool(passed),
        df=df,
        details={"paths": R, "bins": bins, "cells_used": cells,
                 "density_mass": float(mass),
                 "window_mass": float(total_mass_window),
                 "sum_mean_sigmas": float(sum_err),
                 "sum_var_ratio": float(var_ratio),
                 "t": float(t), "density_time": float(t_d),
                 "mu": mu.tolist()})


# ---------------------------------------------------------------------------
# Laplace transform of the polymer partition function
# ---------------------------------------------------------------------------


@dataclass
class LaplaceCheck:
    """Monte Carlo vs contour-integral values of E exp(-s Z)."""

    mc: float
    contour: float
    mc_stderr: float
    contour_error: float
    n: int
    s: float
    t: float

    def __iter__(self):
        return iter((self.mc, self.contour))


def _laplace_contour_n1(s, t, c=0.75, nodes=None, y_max=None):
    """int s^{-lam} Gamma(lam) e^{lam^2 t/2} dlam/(2 pi i), Re lam = c."""
    if y_max is None:
        y_max = math.sqrt(2.0 * 50.0 / t) + 2.0
    if nodes is None:
        nodes = int(max(1201, 40 * y_max * max(1.0, abs(math.log(s)))))
        nodes |= 1
    y = np.linspace(-y_max, y_max, nodes)
    lam = c + 1j * y
    f = np.exp(-lam * math.log(s) + _sc.loggamma(lam)
               + 0.5 * lam * lam * t)
    val = np.trapezoid(f, y).real / (2.0 * math.pi)
    coarse = np.trapezoid(f[::2], y[::2]).real / (2.0 * math.pi)
    return val, abs(val - coarse)


def _laplace_contour_n2(s, t, c=0.75, nodes=None, y_max=None):
    """Rank-2 contour value on two equal vertical lines Re lam = c.

    The Sklyanin weight on two such lines reduces to
    d*sinh(pi d)/pi with d = y_1 - y_2, divided by 2! and by (2 pi)^2,
    and each Gamma factor appears squared (n = 2 independent lines).
    """
    if y_max is None:
        y_max = math.sqrt(2.0 * 50.0 / t) + 2.0
    if nodes is None:
        nodes = int(max(401, 12 * y_max * max(1.0, abs(math.log(max(s,
                                                                    1e-12))))))
        nodes |= 1
    y = np.linspace(-y_max, y_max, nodes)
    lam = c + 1j * y
    g = np.exp(-lam * math.log(s) + 2.0 * _sc.loggamma(lam)
               + 0.5 * lam * lam * t)

    def value(yv, gv):
        # the pair weight d*sinh(pi d)/pi vanishes on the diagonal and
        # its exponential growth is dominated by the Gaussian decay of
        # the Gamma factors for the y ranges used here
        d = yv[:, None] - yv[None, :]
        w = d * np.sinh(np.pi * d) / math.pi
        integrand = gv[:, None] * gv[None, :] * w
        step = yv[1] - yv[0]
        total = np.trapezoid(np.trapezoid(integrand, dx=step, axis=1),
                             dx=step)
        return total.real / (2.0 * (2.0 * math.pi) ** 2)

    val = value(y, g)
    coarse = value(y[::2], g[::2])
    return val, abs(val - coarse)


def laplace_transform_check(n, s, t, paths=200000, rng_seed=0, dt=0.001,
                            contour_c=0.75):
    """Compare E exp(-s Z_n(t)) by simulation and by contour integral.

    For n = 1 the partition function is exp(B_1(t)) and the sample is
    drawn directly; for n = 2 each replicate runs the polymer transform
    at step ``dt``.  The contour route integrates over vertical lines
    Re lam = ``contour_c`` > 0 with the appropriate double-sided
    weight; its reported error is a node-halving estimate.
    """
    if n not in (1, 2):
        raise ValueError("laplace check implemented for n in {1, 2}")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0.0:
        return LaplaceCheck(1.0, 1.0, 0.0, 0.0, n, 0.0, t)
    if n == 1:
        rng = np.random.default_rng(rng_seed)
        z = np.exp(rng.standard_normal(paths) * math.sqrt(t))
        w = np.exp(-s * z)
        mc = float(w.mean())
        sem = float(w.std(ddof=1) / math.sqrt(paths))
        contour, cerr = _laplace_contour_n1(s, t, c=contour_c)
    else:
        shards = 16
        counts = [paths // shards + (1 if k < paths % shards else 0)
                  for k in range(shards)]
        steps = int(math.ceil(t / dt - 1e-12))
        h = t / steps

        def one_shard(k):
            r = counts[k]
            if r == 0:
                return (0.0, 0.0, 0)
            rng = np.random.default_rng([rng_seed, k])
            b = np.zeros((r, 2))        # (B_2, B_1) reversed order
            log_int = np.full(r, -np.inf)
            g_prev = b[:, 1] - b[:, 0]
            sq = math.sqrt(h)
            for _ in range(steps):
                b += rng.standard_normal((r, 2)) * sq
                g_new = b[:, 1] - b[:, 0]
                cell = math.log(h / 2.0) + np.logaddexp(g_prev, g_new)
                log_int = np.logaddexp(log_int, cell)
                g_prev = g_new
            logz = b[:, 0] + log_int
            w = np.exp(-s * np.exp(logz))
            return (float(w.sum()), float((w * w).sum()), r)

        parts = shard_map(one_shard, shards)
        tot = sum(p[0] for p in parts)
        tot2 = sum(p[1] for p in parts)
        cnt = sum(p[2] for p in parts)
        mc = tot / cnt
        var = max(tot2 / cnt - mc * mc, 0.0) * cnt / (cnt - 1)
        sem = math.sqrt(var / cnt)
        contour, cerr = _laplace_contour_n2(s, t, c=contour_c)
    return LaplaceCheck(float(mc), float(contour), float(sem),
                        float(cerr), n, float(s), float(t))


# ---------------------------------------------------------------------------
# exponential-functional diffusion check
# ---------------------------------------------------------------------------


def matsumoto_yor_check(mu, t, paths=100000, dt=0.001, rng_seed=0,
                        drift_bins=32, window=0.03):
    """Two-part check of the exponential-functional diffusion.

    Simulates ``Z_s = int_0^s exp(2 B_u - B_s) du`` for a drifting
    Brownian motion B with drift ``mu`` and tests:

    (a) the drift of ``log Z``: binned mean increments against
        d/dx log K_mu(exp(-x)) evaluated at the bin centres of mass
        (three-sigma band per bin, second half of the time interval);

    (b) the conditional law of B_t given Z_t near its median value:
        a Kolmogorov-Smirnov test against the generalised inverse
        Gaussian density proportional to exp(mu*x - cosh(x)/z).

    The GIG normalising constant is also checked against 2*K_mu(1/z)
    by direct quadrature, and the mu -> -mu symmetry (x -> -x of the
    density) is verified on the evaluation grid.
    """
    mu = float(mu)
    steps = int(math.ceil(t / dt - 1e-12))
    h = t / steps
    burn = steps // 2
    rng = np.random.default_rng(rng_seed)
    R = paths
    b = np.zeros(R)
    log_u = np.full(R, -np.inf)     # log int_0^s exp(2 B_u) du
    sq = math.sqrt(h)

    edges = None
    bin_n = np.zeros(drift_bins)
    bin_sum = np.zeros(drift_bins)
    bin_sumsq = np.zeros(drift_bins)
    bin_x = np.zeros(drift_bins)

    x_prev = None
    for m in range(steps):
        b_new = b + rng.standard_normal(R) * sq + mu * h
        cell = math.log(h / 2.0) + np.logaddexp(2.0 * b, 2.0 * b_new)
        log_u = np.logaddexp(log_u, cell)
        b = b_new
        x_now = log_u - b
        if m == burn:
            lo, hi = np.quantile(x_now, [0.005, 0.995])
            edges = np.linspace(lo, hi, drift_bins + 1)
            x_prev = x_now
        elif m > burn:
            d = x_now - x_prev
            idx = np.searchsorted(edges, x_prev, side="right") - 1
            ok = (idx >= 0) & (idx < drift_bins)
            bin_n += np.bincount(idx[ok], minlength=drift_bins)
            bin_sum += np.bincount(idx[ok], weights=d[ok],
                                   minlength=drift_bins)
            bin_sumsq += np.bincount(idx[ok], weights=d[ok] ** 2,
                                     minlength=drift_bins)
            bin_x += np.bincount(idx[ok], weights=x_prev[ok],
                                 minlength=drift_bins)
            x_prev = x_now

    # (a) drift comparison
    populated = bin_n >= 200
    centers = np.where(populated, bin_x / np.maximum(bin_n, 1), 0.0)
    mean_inc = bin_sum / np.maximum(bin_n, 1)
    var_inc = bin_sumsq / np.maximum(bin_n, 1) - mean_inc ** 2
    sem_inc = np.sqrt(np.maximum(var_inc, 0.0)
                      / np.maximum(bin_n, 1))

    def log_k(xv):
        return math.log(specfun.macdonald_K(mu, math.exp(-xv)))

    fd = 1e-5
    target = np.array([
        (log_k(c + fd) - log_k(c - fd)) / (2 * fd) * h if populated[j]
        else 0.0
        for j, c in enumerate(centers)])
    pulls = np.where(populated & (sem_inc > 0),
                     np.abs(mean_inc - target) / np.where(sem_inc > 0,
                                                          sem_inc, 1.0),
                     0.0)
    bins_used = int(populated.sum())
    bins_ok = int(((pulls < 3.0) & populated).sum())
    drift_pass = bins_used >= drift_bins - 4 and \
        bins_ok >= bins_used - max(2, bins_used // 16)

    # (b) conditional law near the median of Z_t
    log_z = log_u - b
    z_star = float(np.exp(np.median(log_z)))
    sel = np.abs(log_z - math.log(z_star)) < window
    b_sel = b[sel]

    L = float(np.arccosh(max(50.0 * z_star, 2.0)) + 3.0)
    L = max(L, float(np.abs(b_sel).max()) + 2.0 if b_sel.size else 3.0)
    grid = np.linspace(-L, L, 8001)
    log_dens = mu * grid - np.cosh(grid) / z_star
    log_dens -= log_dens.max()
    dens = np.exp(log_dens)
    norm = np.trapezoid(dens, grid)
    cdf_grid = np.concatenate([[0.0],
                               np.cumsum((dens[1:] + dens[:-1]) / 2.0
                                         * np.diff(grid))])
    cdf_grid /= cdf_grid[-1]

    def cond_cdf(xv):
        return np.interp(xv, grid, cdf_grid)

    ks_stat, ks_p = (math.nan, math.nan)
    if b_sel.size >= 200:
        ks_stat, ks_p = ks_pvalue(b_sel, cond_cdf)

    # normalisation: integral of exp(mu x - cosh(x)/z) vs 2 K_mu(1/z)
    raw = np.trapezoid(np.exp(mu * grid - np.cosh(grid) / z_star), grid)
    k_val = 2.0 * specfun.macdonald_K(mu, 1.0 / z_star)
    norm_rel = abs(raw - k_val) / k_val

    # symmetry: the conditional CDF with drift -mu equals the upper
    # tail of the one with drift +mu reflected through the origin
    log_dens_m = -mu * grid - np.cosh(grid) / z_star
    log_dens_m -= log_dens_m.max()
    dens_m = np.exp(log_dens_m)
    cdf_m = np.concatenate([[0.0],
                            np.cumsum((dens_m[1:] + dens_m[:-1]) / 2.0
                                      * np.diff(grid))])
    cdf_m /= cdf_m[-1]
    sym_gap = float(np.max(np.abs(cdf_m - (1.0 - cdf_grid[::-1]))))

    cond_pass = (not math.isnan(ks_p)) and ks_p > 0.001
    passed = drift_pass and cond_pass and norm_rel < 1e-8 \
        and sym_gap < 1e-10
    return GoodnessOfFit(
        name="exp-functional-diffusion",
        statistic=float(np.max(pulls[populated]) if bins_used else
                        math.inf),
        p_value=float(ks_p),
        passed=bool(passed),
        df=bins_used,
        details={"bins_used": bins_used, "bins_ok": bins_ok,
                 "max_drift_pull": float(np.max(pulls[populated])
                                         if bins_used else math.inf),
                 "ks_statistic": float(ks_stat),
                 "conditional_samples": int(b_sel.size),
                 "z_star": z_star,
                 "gig_normalisation_rel_err": float(norm_rel),
                 "symmetry_gap": sym_gap,
                 "mu": mu, "t": float(t)})
