"""Integer-lattice q-deformation of the exponential-functional layer.

A coupled birth-death pair (Y, Z) on the lattice plays the role the
Brownian path and its transform play elsewhere in the package: the
second coordinate alone is Markov, with transition ratios built from a
q-deformed special function, and the conditional law of the first
coordinate given the second is an explicit normalized weight.  The
module provides that special function in exact rational arithmetic,
its three-term difference equation and continuous q-Hermite link, the
three transition kernels and their exact intertwining, an exhaustive
finite-horizon verification of the conditional law, the classical
(q = 0) limit — a discrete analogue of the reflection/maximum identity
for simple random walk — and the stationary output theorem (Burke
property) for the second coordinate.

Exactness
---------
Whenever ``q`` and the spectral value ``t`` (the deformation base
raised to the spectral exponent) are :class:`fractions.Fraction`,
every quantity here is rational and identities are checked for literal
equality.  Float mode covers generic parameters.

Conventions (adjudicated, not assumed)
--------------------------------------
``0**0 = 1`` and the empty product is 1, so the q-Pochhammer symbol at
q = 0 is identically 1.  Under these conventions the degenerate case
q = 0, t = 1 gives psi(z) = z + 1, and the exact intertwining holds;
the classical-limit kernel is (z+2)/(2(z+1)) upward.  The often-quoted
variant (z+1)/(2z) corresponds to psi(z) = z and is inconsistent with
this chain: started from the origin, the pair returns to (0, 0) with
positive probability, so the downward rate at z = 1 cannot vanish.
See :func:`pitman_limit_check`, which records the comparison.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._stats import GoodnessOfFit, chi_square_counts


class ConventionError(ArithmeticError):
    """An exact identity that pins the edge-case conventions failed."""


def _is_exact(*values):
    return all(isinstance(v, (Fraction, int)) for v in values)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QParams:
    """Deformation parameters: base q in [0, 1) plus one spectral handle.

    Exactly one of ``t`` (the base raised to the spectral exponent —
    kept rational for exact mode), ``nu`` (the exponent itself), or
    ``p`` (the upward probability of the underlying walk, with
    p = t^2 / (1 + t^2)) must be given; the others are derived.  With
    Fraction-valued ``q`` and ``t`` the whole module runs in exact
    rational arithmetic.
    """

    q: object
    t: object = None
    nu: object = None
    p: object = None

    def __post_init__(self):
        q = self.q
        if isinstance(q, float) and q == 0.0:
            q = 0
            object.__setattr__(self, "q", q)
        if not 0 <= q < 1:
            raise ValueError("q must lie in [0, 1)")
        given = [name for name in ("t", "nu", "p")
                 if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of t, nu, p")
        if self.t is not None:
            t = self.t
            if not t > 0:
                raise ValueError("t must be positive")
            if q == 0:
                nu = 0.0 if t == 1 else None
            else:
                nu = math.log(float(t)) / math.log(float(q))
            object.__setattr__(self, "nu", nu)
        elif self.nu is not None:
            nu = self.nu
            if q == 0:
                if nu != 0:
                    raise ValueError(
                        "at q = 0 only the exponent 0 gives a positive "
                        "spectral value; pass t directly")
                t = Fraction(1)
            else:
                t = float(q) ** nu
            object.__setattr__(self, "t", t)
        else:
            p = self.p
            if not 0 < p < 1:
                raise ValueError("p must lie in (0, 1) to derive t")
            rho = p / (1 - p) if isinstance(p, Fraction) else \
                float(p) / (1.0 - float(p))
            t = math.sqrt(float(rho))
            object.__setattr__(self, "t", t)
            if q == 0:
                object.__setattr__(self, "nu", None)
            else:
                object.__setattr__(self, "nu",
                                   math.log(t) / math.log(float(q)))
        if self.p is None:
            t = self.t
            p = t * t / (1 + t * t)
            object.__setattr__(self, "p", p)
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")

    @property
    def exact(self):
        return _is_exact(self.q, self.t)

    def one(self):
        """Multiplicative unit matching the arithmetic mode."""
        return Fraction(1) if self.exact else 1.0


@dataclass(frozen=True)
class QChainState:
    """State of the coupled pair: 0 <= y <= z."""

    y: int
    z: int

    def __post_init__(self):
        if not 0 <= self.y <= self.z:
            raise ValueError("need 0 <= y <= z")


# ---------------------------------------------------------------------------
# the special function and its difference equation
# ---------------------------------------------------------------------------


def qpochhammer(q, n):
    """Finite q-Pochhammer product (1-q)(1-q^2)...(1-q^n); empty = 1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    one = Fraction(1) if _is_exact(q) else 1.0
    out = one
    power = one
    for _ in range(n):
        power = power * q
        out = out * (one - power)
    return out


def _poch_list(q, n):
    one = Fraction(1) if _is_exact(q) else 1.0
    out = [one]
    power = one
    for _ in range(n):
        power = power * q
        out.append(out[-1] * (one - power))
    return out


def q_whittaker(params, z):
    """Normalized spectral sum sum_{y=0}^{z} t^{2y-z} / ((q)_y (q)_{z-y}).

    Exact rational when the parameters are; symmetric under t -> 1/t
    and strictly positive for every z >= 0.
    """
    if z < 0:
        raise ValueError("z must be nonnegative")
    q, t = params.q, params.t
    poch = _poch_list(q, z)
    total = 0 * params.one()
    for y in range(z + 1):
        total += t ** (2 * y - z) / (poch[y] * poch[z - y])
    return total


def q_difference_residual(params, z_max):
    """Residual of the three-term recursion over 0 <= z <= z_max.

    The function satisfies (1 - q^{z+1}) f(z+1) + f(z-1) =
    (t + 1/t) f(z) with f(-1) = 0.  Exact mode returns the exact
    maximum residual (zero when the conventions are consistent); float
    mode returns the maximum relative residual.
    """
    if z_max < 1:
        raise ValueError("z_max must be at least 1")
    q, t = params.q, params.t
    one = params.one()
    psi = [q_whittaker(params, z) for z in range(z_max + 2)]
    coef = t + one / t
    worst = 0 * one
    for z in range(z_max + 1):
        below = psi[z - 1] if z >= 1 else 0 * one
        res = (one - q ** (z + 1)) * psi[z + 1] + below - coef * psi[z]
        if params.exact:
            worst = max(worst, abs(res))
        else:
            worst = max(worst, abs(res) / abs(coef * psi[z]))
    return worst


@dataclass(frozen=True)
class QHermiteReport:
    """Comparison of the spectral sum against the orthogonal-polynomial
    route (continuous q-Hermite three-term recurrence)."""

    z_max: int
    max_gap: object
    exact: bool
    passed: bool
    note: str


def q_hermite_check(params, z_max):
    """Verify (q)_z f(z) equals the continuous q-Hermite polynomial.

    The polynomial route runs the standard recurrence H_{n+1} =
    2x H_n - (1 - q^n) H_{n-1} from H_0 = 1, H_1 = 2x at the spectral
    point x = (t + 1/t)/2; the normalization is pinned by matching the
    z = 0, 1 values of the sum route.  A mismatch is reported, never
    silently rescaled.
    """
    if z_max < 0:
        raise ValueError("z_max must be nonnegative")
    q, t = params.q, params.t
    one = params.one()
    two_x = t + one / t
    poch = _poch_list(q, z_max)
    psi = [q_whittaker(params, z) for z in range(z_max + 1)]
    h_prev, h_cur = one, two_x            # H_0, H_1
    gaps = [abs(poch[0] * psi[0] - h_prev)]
    if z_max >= 1:
        gaps.append(abs(poch[1] * psi[1] - h_cur))
    for z in range(2, z_max + 1):
        h_prev, h_cur = h_cur, two_x * h_cur - (one - q ** (z - 1)) * h_prev
        gaps.append(abs(poch[z] * psi[z] - h_cur))
    worst = max(gaps)
    if params.exact:
        passed = worst == 0
        note = "exact equality" if passed else \
            "normalization mismatch: sum route and recurrence disagree"
    else:
        scale = max(abs(float(poch[z] * psi[z])) for z in range(z_max + 1))
        passed = float(worst) < 1e-11 * max(scale, 1.0)
        note = "float agreement within 1e-11 relative" if passed else \
            "normalization mismatch beyond float tolerance"
    return QHermiteReport(z_max=z_max, max_gap=worst, exact=params.exact,
                          passed=passed, note=note)


# ---------------------------------------------------------------------------
# transition kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairKernel:
    """One-step kernel of the coupled pair (y, z)."""

    params: QParams

    def row(self, y, z):
        """Transition row from (y, z); entries sum to one exactly."""
        if y < 0 or z < y:
            raise ValueError("state must satisfy 0 <= y <= z")
        q, p = self.params.q, self.params.p
        one = self.params.one()
        stay = (one - p) * q ** y
        down = (one - p) * (one - q ** y)
        out = {(y + 1, z + 1): p, (y, z + 1): stay}
        if down != 0:
            out[(y - 1, z - 1)] = down
        total = sum(out.values())
        if self.params.exact and total != 1:
            raise ConventionError("pair-kernel row sum is not one")
        return out


@dataclass(frozen=True)
class MarkovKernel:
    """One-step kernel of the second coordinate alone."""

    params: QParams
    _psi: dict = field(default_factory=dict, repr=False)

    def _psi_at(self, z):
        if z not in self._psi:
            self._psi[z] = q_whittaker(self.params, z)
        return self._psi[z]

    def row(self, z):
        if z < 0:
            raise ValueError("z must be nonnegative")
        q, t = self.params.q, self.params.t
        one = self.params.one()
        coef = t + one / t
        here = self._psi_at(z)
        out = {z + 1: (one - q ** (z + 1)) * self._psi_at(z + 1)
               / (coef * here)}
        if z >= 1:
            out[z - 1] = self._psi_at(z - 1) / (coef * here)
        total = sum(out.values())
        if self.params.exact:
            if total != 1:
                raise ConventionError(
                    "second-coordinate row sum is not one: the "
                    "three-term recursion fails under these conventions")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ConventionError("second-coordinate row sum deviates "
                                  "beyond float tolerance")
        return out


@dataclass(frozen=True)
class ConditionalKernel:
    """Link kernel: z spreads to (y, z) with the normalized weights."""

    params: QParams
    _psi: dict = field(default_factory=dict, repr=False)

    def _psi_at(self, z):
        if z not in self._psi:
            self._psi[z] = q_whittaker(self.params, z)
        return self._psi[z]

    def row(self, z):
        if z < 0:
            raise ValueError("z must be nonnegative")
        q, t = self.params.q, self.params.t
        poch = _poch_list(q, z)
        norm = self._psi_at(z)
        out = {}
        for y in range(z + 1):
            out[(y, z)] = t ** (2 * y - z) / (poch[y] * poch[z - y] * norm)
        total = sum(out.values())
        if self.params.exact and total != 1:
            raise ConventionError("link-kernel row sum is not one")
        return out


def kernels(params):
    """The three kernels (pair, second-coordinate, link) as row maps."""
    return PairKernel(params), MarkovKernel(params), ConditionalKernel(params)


def intertwining_check(params, z_max):
    """Max discrepancy of (QK)(z, .) - (K Pi)(z, .) over z <= z_max.

    Exact mode must return exactly zero; this single identity pins all
    the edge-case conventions at once.
    """
    if z_max < 1:
        raise ValueError("z_max must be at least 1")
    pair, second, link = kernels(params)
    worst = 0 * params.one()
    for z in range(z_max + 1):
        lhs = {}
        for z2, qprob in second.row(z).items():
            for target, kprob in link.row(z2).items():
                lhs[target] = lhs.get(target, 0) + qprob * kprob
        rhs = {}
        for (y1, _), kprob in link.row(z).items():
            for target, pprob in pair.row(y1, z).items():
                rhs[target] = rhs.get(target, 0) + kprob * pprob
        for target in set(lhs) | set(rhs):
            gap = abs(lhs.get(target, 0) - rhs.get(target, 0))
            worst = max(worst, gap)
    return worst


# ---------------------------------------------------------------------------
# exhaustive finite-horizon verification of the conditional law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BruteForceReport:
    steps: int
    trajectory_count: int
    max_conditional_gap: object
    max_markov_gap: object
    passed: bool


def conditional_law_bruteforce(params, steps):
    """Enumerate every positive-probability pair trajectory from (0, 0).

    Groups the exact trajectory weights by the path of the second
    coordinate and asserts (a) the conditional law of the first
    coordinate at the horizon equals the normalized link weights and
    (b) the probability of each second-coordinate path factorizes
    through its one-step kernel — the two halves of the lattice
    Markov-function theorem, checked with no sampling error.
    """
    if not 1 <= steps <= 14:
        raise ValueError("steps must be in [1, 14] for exhaustive search")
    pair, second, link = kernels(params)
    acc = {}
    stack = [(0, 0, (0,), params.one())]
    while stack:
        y, z, ztraj, prob = stack.pop()
        if len(ztraj) == steps + 1:
            bucket = acc.setdefault(ztraj, {})
            bucket[y] = bucket.get(y, 0) + prob
            continue
        for (y2, z2), step_prob in pair.row(y, z).items():
            stack.append((y2, z2, ztraj + (z2,), prob * step_prob))
    worst_cond = 0 * params.one()
    worst_markov = 0 * params.one()
    for ztraj, bucket in acc.items():
        total = sum(bucket.values())
        target = link.row(ztraj[-1])
        for y in range(ztraj[-1] + 1):
            got = bucket.get(y, 0) / total
            worst_cond = max(worst_cond,
                             abs(got - target[(y, ztraj[-1])]))
        markov = params.one()
        for a, b in zip(ztraj[:-1], ztraj[1:]):
            markov = markov * second.row(a).get(b, 0)
        worst_markov = max(worst_markov, abs(total - markov))
    if params.exact:
        passed = worst_cond == 0 and worst_markov == 0
    else:
        passed = float(worst_cond) < 1e-12 and float(worst_markov) < 1e-12
    return BruteForceReport(steps=steps, trajectory_count=len(acc),
                            max_conditional_gap=worst_cond,
                            max_markov_gap=worst_markov, passed=passed)


# ---------------------------------------------------------------------------
# classical limit and output theorem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PitmanReport:
    """Exact record of the q = 0 degenerate kernel vs the shifted form.

    ``up_probs[k]`` is the upward rate of this chain at state z = k;
    ``display_up_probs[k]`` is the often-quoted variant (z+1)/(2z)
    evaluated at z = k + 1 (it is undefined at z = 0).  The two tuples
    coincide entry-by-entry — the variant is the same chain with every
    state shifted up one unit — but evaluated at equal z the kernels
    differ, which is what ``display_matches`` records.
    """

    z_max: int
    psi_values: tuple
    up_probs: tuple
    display_up_probs: tuple
    display_matches: bool
    same_sequence_shifted: bool
    intertwining_gap: object
    note: str


def pitman_limit_check(z_max):
    """Evaluate the q = 0, t = 1 kernel and adjudicate the conventions.

    With 0**0 = 1 and unit empty products the spectral sum degenerates
    to psi(z) = z + 1, giving upward rates (z+2)/(2(z+1)) — the
    maximum-reflection chain of simple symmetric random walk started
    at the origin.  The alternative normalization psi(z) = z (upward
    rate (z+1)/(2z)) is recorded for comparison; it cannot describe
    this chain, whose origin state is reachable again from (1, 1).
    """
    if z_max < 1:
        raise ValueError("z_max must be at least 1")
    params = QParams(q=Fraction(0), t=Fraction(1))
    psi = tuple(q_whittaker(params, z) for z in range(z_max + 1))
    second = MarkovKernel(params)
    ups = tuple(second.row(z)[z + 1] for z in range(z_max + 1))
    display = tuple(Fraction(z + 1, 2 * z) for z in range(1, z_max + 1))
    matches = all(ups[z] == display[z - 1] for z in range(1, z_max + 1))
    shifted = all(ups[k] == display[k] for k in range(z_max))
    gap = intertwining_check(params, z_max)
    note = ("degenerate spectral sum is z + 1; upward rate "
            "(z+2)/(2(z+1)) with exact intertwining; the variant "
            "(z+1)/(2z) is the same chain shifted one state up and "
            "does not match at equal z (it would forbid returning to "
            "the origin, which this chain does from (1, 1))")
    return PitmanReport(z_max=z_max, psi_values=psi, up_probs=ups,
                        display_up_probs=display, display_matches=matches,
                        same_sequence_shifted=shifted,
                        intertwining_gap=gap, note=note)


def stationary_law(params, tail=1e-16):
    """Stationary law of the first coordinate for p < 1/2.

    Detailed balance gives pi(y+1)/pi(y) = rho / (1 - q^{y+1}) with
    rho = p/(1-p), i.e. pi(y) proportional to rho^y / (q)_y; the
    support is truncated once the remaining mass is below ``tail``.
    """
    p = float(params.p)
    q = float(params.q)
    if not p < 0.5:
        raise ValueError("stationary law requires p < 1/2")
    rho = p / (1.0 - p)
    weights = [1.0]
    while True:
        y = len(weights)
        nxt = weights[-1] * rho / (1.0 - q ** y)
        if nxt < tail * sum(weights) and y > 8:
            break
        weights.append(nxt)
        if y > 10_000:
            raise RuntimeError("stationary tail did not close")
    w = np.array(weights)
    return w / w.sum()


def simulate_chain(params, steps, rng_seed=0, y_init=0, z_init=0):
    """Simulate the coupled pair; returns integer arrays (y, z).

    The second coordinate is allowed to run over all integers (needed
    for the output theorem, where the start is stationary rather than
    the origin); the first stays nonnegative by construction.
    """
    p = float(params.p)
    q = float(params.q)
    rng = np.random.default_rng([rng_seed, 17])
    y = np.empty(steps + 1, dtype=np.int64)
    z = np.empty(steps + 1, dtype=np.int64)
    y[0], z[0] = y_init, z_init
    u = rng.random(steps)
    cur_y, cur_z = int(y_init), int(z_init)
    for k in range(steps):
        draw = u[k]
        if draw < p:
            cur_y += 1
            cur_z += 1
        elif draw < p + (1.0 - p) * q ** cur_y:
            cur_z += 1
        else:
            cur_y -= 1
            cur_z -= 1
        y[k + 1] = cur_y
        z[k + 1] = cur_z
    return y, z


def burke_check(params, steps=1_000_000, rng_seed=0):
    """Output theorem: started stationary, the second coordinate is a
    lattice walk with i.i.d. increments, upward with probability 1 - p.

    The first coordinate is drawn from :func:`stationary_law`; the
    second starts at 0.  Chi-square tests on the increment frequencies
    (against 1-p, p) and on the lag-one pair frequencies (against
    independence) must both clear the 0.001 level.  Note the upward
    probability: mass balance gives P(up) = p + (1-p) E[q^Y] = 1 - p
    at stationarity, so for p < 1/2 the walk drifts upward.
    """
    p = float(params.p)
    if not p < 0.5:
        raise ValueError("output theorem requires p < 1/2")
    pi = stationary_law(params)
    rng = np.random.default_rng([rng_seed, 3])
    y0 = int(rng.choice(pi.size, p=pi))
    y, z = simulate_chain(params, steps, rng_seed=rng_seed, y_init=y0)
    ups = np.diff(z) == 1
    n_up = int(ups.sum())
    inc_stat, inc_df, inc_p, _ = chi_square_counts(
        np.array([n_up, steps - n_up]),
        np.array([1.0 - p, p]), steps)
    a, b = ups[:-1], ups[1:]
    pair_counts = np.array([
        int(np.sum(a & b)), int(np.sum(a & ~b)),
        int(np.sum(~a & b)), int(np.sum(~a & ~b))])
    pp = np.array([(1 - p) ** 2, (1 - p) * p, p * (1 - p), p ** 2])
    lag_stat, lag_df, lag_p, _ = chi_square_counts(
        pair_counts, pp, steps - 1)
    passed = inc_p > 1e-3 and lag_p > 1e-3
    return GoodnessOfFit(
        name="stationary-output-walk",
        statistic=float(max(inc_stat, lag_stat)),
        p_value=float(min(inc_p, lag_p)),
        passed=bool(passed),
        df=max(inc_df, lag_df),
        details={"steps": int(steps),
                 "up_fraction": n_up / steps,
                 "expected_up": 1.0 - p,
                 "increment_p": float(inc_p),
                 "lag_pair_p": float(lag_p),
                 "start_y": y0,
                 "support": int(pi.size)})
