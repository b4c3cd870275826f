"""Scalar special functions, spectral densities, and series evaluators.

Contents
--------
* log_gamma / digamma / gamma_fns : hand-rolled Lanczos log-gamma and a
  recurrence-plus-asymptotic digamma, valid on the complex plane cut along
  the nonpositive reals.
* vandermonde / is_regular / hciz_J : the determinant ratio
  J_lam(x) = det(exp(lam_i x_j)) / prod_{i<j}(lam_i - lam_j),
  with a confluent divided-difference route when eigenvalues collide.
* macdonald_K : modified Bessel function of the second kind via the
  cosh-integral representation (real or complex order).
* sklyanin_density : the continuous-spectrum Plancherel weight for the
  open quantum Toda chain.
* fundamental_coeff / fundamental_whittaker / whittaker_from_series :
  the power-series ("fundamental") Whittaker solutions and the symmetric
  combination that rebuilds the recurrent one.
* theta_density : the spectral heat-like density obtained by integrating
  Whittaker functions against the Sklyanin weight (n <= 2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product

import numpy as np
from scipy.linalg import expm

from ._quad import trap_nodes

__all__ = [
    "log_gamma", "digamma", "gamma", "rgamma", "gamma_fns",
    "vandermonde", "is_regular", "hciz_J",
    "macdonald_K",
    "sklyanin_density",
    "fundamental_coeff", "coeff_by_recursion", "coeff_bracket",
    "coeff_recursion_residual",
    "fundamental_whittaker", "whittaker_from_series",
    "toda_eigen_residual",
    "theta_density", "theta_density_forms", "SeriesValue",
]

TWO_PI = 2.0 * math.pi

# ---------------------------------------------------------------------------
# gamma / digamma
# ---------------------------------------------------------------------------

# Lanczos coefficients, g = 7, 9 terms (double precision accurate).
_LANCZOS_G = 7.0
_LANCZOS_C = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(z):
    """log Gamma(z) for real or complex z (principal branch, Lanczos).

    Accepts scalars or arrays.  Poles (z = 0, -1, -2, ...) raise.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).copy()
    if np.any((z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.round(z.real))):
        raise ValueError("log_gamma pole at nonpositive integer argument")
    out = np.empty_like(z)
    refl = z.real < 0.5
    zz = np.where(refl, 1.0 - z, z)
    # Lanczos for Re(zz) >= 0.5
    w = zz - 1.0
    acc = np.full_like(w, _LANCZOS_C[0])
    for k in range(1, len(_LANCZOS_C)):
        acc = acc + _LANCZOS_C[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    lg = _HALF_LOG_2PI + (w + 0.5) * np.log(t) - t + np.log(acc)
    if np.any(refl):
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        zr = z[refl]
        out[refl] = np.log(np.pi) - np.log(np.sin(np.pi * zr)) - lg[refl]
    out[~refl] = lg[~refl]
    if np.all(np.abs(out.imag) == 0.0):
        out = out.real.astype(complex)
    return out[0] if scalar else out


def gamma(z):
    """Gamma(z) = exp(log_gamma(z)); real output for real input."""
    zc = np.asarray(z, dtype=complex)
    val = np.exp(log_gamma(z))
    if np.all(zc.imag == 0.0):
        val = np.real(val)
        if np.ndim(z) == 0:
            return float(val)
    return val


def rgamma(z):
    """1 / Gamma(z), returning exactly 0.0 at the poles of Gamma."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    pole = (z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.round(z.real))
    left = (z.real < 0.5) & ~pole
    right = ~left & ~pole
    if np.any(right):
        out[right] = np.exp(-log_gamma(z[right]))
    if np.any(left):
        zl = z[left]
        # 1/Gamma(z) = sin(pi z) Gamma(1 - z) / pi
        out[left] = np.sin(np.pi * zl) * np.exp(log_gamma(1.0 - zl)) / np.pi
    out[pole] = 0.0
    return out[0] if scalar else out


_BERNOULLI_TERMS = [  # B_{2k} / (2k) for the digamma asymptotic series
    (2, 1.0 / 12.0), (4, -1.0 / 120.0), (6, 1.0 / 252.0),
    (8, -1.0 / 240.0), (10, 1.0 / 132.0), (12, -691.0 / 32760.0),
    (14, 1.0 / 12.0),
]


def digamma(z):
    """psi(z) = d/dz log Gamma(z) via upward recurrence + asymptotic series."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).astype(complex)
    if np.any((z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.round(z.real))):
        raise ValueError("digamma pole at nonpositive integer argument")
    out = np.zeros_like(z)
    work = z.copy()
    refl = work.real < 0.0
    if np.any(refl):
        # psi(z) = psi(1-z) - pi cot(pi z)
        out[refl] -= np.pi / np.tan(np.pi * work[refl])
        work[refl] = 1.0 - work[refl]
    # push Re(z) above 12
    for _ in range(16):
        small = work.real < 12.0
        if not np.any(small):
            break
        out[small] -= 1.0 / work[small]
        work[small] += 1.0
    w2 = 1.0 / (work * work)
    series = np.zeros_like(work)
    p = w2.copy()
    for _, coef in _BERNOULLI_TERMS:
        series += coef * p
        p = p * w2
    out += np.log(work) - 0.5 / work - series
    if np.all(out.imag == 0.0):
        out = out.real
    return out[0] if scalar else out


def gamma_fns(z):
    """Convenience bundle: (log_gamma(z), digamma(z))."""
    return log_gamma(z), digamma(z)


# ---------------------------------------------------------------------------
# determinant ratio J and friends
# ---------------------------------------------------------------------------

def vandermonde(lam):
    """prod_{i<j} (lam_i - lam_j).  Antisymmetric under entry swaps."""
    lam = np.asarray(lam)
    n = lam.shape[0]
    out = lam.dtype.type(1) if lam.dtype.kind == "c" else 1.0
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (lam[i] - lam[j])
    return out


def is_regular(lam, tol=1e-6):
    """True if all pairwise gaps exceed tol in units of max |lam_i|."""
    lam = np.asarray(lam, dtype=float)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    if scale == 0.0:
        return lam.size <= 1
    n = lam.size
    for i in range(n):
        for j in range(i + 1, n):
            if abs(lam[i] - lam[j]) <= tol * scale:
                return False
    return True


def _divided_difference_matrix(lam, x):
    """M[i, j] = (i-th order divided difference of e^{. x_j}) on nodes lam.

    Uses the bidiagonal-matrix trick: for Z = diag(lam) + superdiag(1),
    expm(x Z)[0, i] is the divided difference of e^{x .} on lam_1..lam_{i+1}.
    Stable under coalescing nodes.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    Z = np.diag(lam) + np.diag(np.ones(n - 1), 1)
    M = np.empty((n, n))
    for j, xj in enumerate(np.asarray(x, dtype=float)):
        M[:, j] = expm(xj * Z)[0, :]
    return M


def hciz_J(lam, x, degeneracy_tol=1e-6):
    """det(exp(lam_i x_j)) / prod_{i<j}(lam_i - lam_j), any real lam.

    Regular spectra use the determinant ratio directly; (near-)degenerate
    spectra switch to the confluent divided-difference evaluation, which is
    continuous through the switch.  At lam = 0 the value is
    prod_{i<j}(x_i - x_j) / prod_{j=1}^{n-1} j!.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    if lam.shape != x.shape or lam.ndim != 1:
        raise ValueError("lam and x must be equal-length 1-d arrays")
    n = lam.size
    if n == 1:
        return float(math.exp(lam[0] * x[0]))
    if is_regular(lam, degeneracy_tol):
        M = np.exp(np.outer(lam, x))
        return float(np.linalg.det(M) / vandermonde(lam))
    M = _divided_difference_matrix(lam, x)
    sign = -1.0 if (n * (n - 1) // 2) % 2 else 1.0
    return float(sign * np.linalg.det(M))


# ---------------------------------------------------------------------------
# Macdonald function
# ---------------------------------------------------------------------------

_K_WINDOW_Z = (1e-3, 50.0)
_K_WINDOW_NU = 20.0


def _k_rule(nu_re, nu_im, z):
    """Cutoff T and step h for the cosh-integral rule."""
    a = abs(nu_re)
    # log of the integrand peak (real-order part only; |cos| <= 1 otherwise)
    if a > 0 and a / z > 1e-12:
        tstar = math.asinh(a / z)
        log_peak = -math.hypot(z, a) + a * tstar
    else:
        tstar = 0.0
        log_peak = -z
    T = tstar + 1.0
    while -z * math.cosh(T) + a * T > log_peak - 46.0 and T < 60.0:
        T += 0.5
    h = min(0.05, math.pi / (3.0 * (1.0 + abs(nu_im))))
    return T, h


def macdonald_K(nu, z, rel_tol=1e-12, rule=None):
    """K_nu(z) by trapezoid quadrature of int_0^inf e^{-z cosh t} cosh(nu t) dt.

    nu may be complex (imaginary order gives the real integrand
    e^{-z cosh t} cos(|nu| t)).  z > 0.  Warns when (z, nu) leaves the
    validated accuracy window z in [1e-3, 50], |Re nu| <= 20.
    If `rule` = (T, h) is supplied that fixed rule is used (no adaptivity),
    which makes the value a smooth function of z for stencil work.
    """
    z = float(z)
    if z <= 0.0:
        raise ValueError("macdonald_K requires z > 0")
    nu = complex(nu)
    if not (_K_WINDOW_Z[0] <= z <= _K_WINDOW_Z[1]) or abs(nu.real) > _K_WINDOW_NU:
        warnings.warn(
            f"macdonald_K outside validated window (nu={nu}, z={z}); "
            "accuracy not guaranteed", stacklevel=2)
    if rule is None:
        T, h = _k_rule(nu.real, nu.imag, z)
    else:
        T, h = rule

    def _value(step):
        m = int(math.ceil(T / step))
        t = step * np.arange(m + 1)
        f = np.exp(-z * np.cosh(t)) * np.cosh(nu * t)
        w = np.full(m + 1, step)
        w[0] = 0.5 * step
        return np.sum(w * f)

    val = _value(h)
    if rule is None:
        for _ in range(3):
            h *= 0.5
            nxt = _value(h)
            if abs(nxt - val) <= rel_tol * max(abs(nxt), 1e-300):
                val = nxt
                break
            val = nxt
    if abs(val.imag) <= 1e-12 * max(abs(val.real), 1e-300):
        return float(val.real)
    return val


def _k_imag_orders(ds, z, extra_drop=0.0):
    """K_{i d}(z) for an array of real d >= 0 (vectorized, internal).

    Real integrand e^{-z cosh t} cos(d t); no accuracy-window warning.
    """
    ds = np.asarray(ds, dtype=float)
    T = math.acosh(1.0 + (46.0 + extra_drop) / z)
    h = min(0.05, math.pi / (3.0 * (1.0 + float(np.max(ds, initial=0.0)))))
    m = int(math.ceil(T / h))
    t = h * np.arange(m + 1)
    base = np.exp(-z * np.cosh(t)) * h
    base[0] *= 0.5
    return np.cos(np.outer(ds, t)) @ base


# ---------------------------------------------------------------------------
# Sklyanin density
# ---------------------------------------------------------------------------

def sklyanin_density(lam):
    """s_n(lam) = (2 pi i)^{-n} (n!)^{-1} prod_{j != k} Gamma(lam_j - lam_k)^{-1}.

    lam: length-n complex vector.  Returns a complex number; on the
    imaginary axis (lam = i u, u real) the product over j != k is real
    and nonnegative.
    """
    lam = np.asarray(lam, dtype=complex)
    n = lam.size
    prod = 1.0 + 0.0j
    for j in range(n):
        for k in range(n):
            if j != k:
                prod *= rgamma(lam[j] - lam[k])
    return prod / (TWO_PI * 1j) ** n / math.factorial(n)


# ---------------------------------------------------------------------------
# fundamental series coefficients a_{n,m}
# ---------------------------------------------------------------------------

def _lg_scalar(z):
    """Scalar complex log-gamma (plain-Python Lanczos; internal hot path)."""
    import cmath
    if z.real < 0.5:
        return (math.log(math.pi) - cmath.log(cmath.sin(math.pi * z))
                - _lg_scalar(1.0 - z))
    w = z - 1.0
    acc = _LANCZOS_C[0]
    for k in range(1, 9):
        acc += _LANCZOS_C[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (w + 0.5) * cmath.log(t) - t + cmath.log(acc)


def _rg_scalar(z):
    """Scalar 1/Gamma with exact zeros at the poles (internal hot path)."""
    import cmath
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == round(z.real):
        return 0.0 + 0.0j
    if z.real < 0.5:
        return cmath.sin(math.pi * z) * cmath.exp(_lg_scalar(1.0 - z)) / math.pi
    return cmath.exp(-_lg_scalar(z))


def _coeff(n, m, nu):
    """Recursive kernel for fundamental_coeff (tuples in, complex out)."""
    if n == 2:
        return (_rg_scalar(complex(m[0] + 1))
                * _rg_scalar(nu[0] - nu[1] + m[0] + 1))
    shift = nu[n - 1] / (n - 1)
    mu = tuple(nu[i] + shift for i in range(n - 1))
    total = 0.0 + 0.0j
    free_ranges = [range(mi + 1) for mi in m[: n - 2]]
    for kfree in product(*free_ranges):
        k = (0,) + kfree + (0,)  # k_0 .. k_{n-1} with k_0 = k_{n-1} = 0
        factor = 1.0 + 0.0j
        for i in range(1, n):  # i = 1..n-1
            factor *= _rg_scalar(complex(m[i - 1] - k[i] + 1))
            factor *= _rg_scalar(nu[i - 1] - nu[n - 1] + m[i - 1] - k[i - 1] + 1)
            if factor == 0.0:
                break
        if factor == 0.0:
            continue
        total += _coeff_cached(n - 1, kfree, mu) * factor
    return total


@lru_cache(maxsize=200000)
def _coeff_cached(n, m, nu):
    return _coeff(n, m, nu)


def fundamental_coeff(n, m, nu):
    """Series coefficient a_{n,m}(nu), m a length-(n-1) multi-index.

    Defined by a_{2,m} = 1/(m! Gamma(nu_1 - nu_2 + m + 1)) and the
    rank-lowering sum with shifted spectral variable
    mu_i = nu_i + nu_n/(n-1).  a_{n,0} = prod_{i<j} Gamma(nu_i-nu_j+1)^{-1}.
    """
    m = tuple(int(v) for v in m)
    if n < 2:
        raise ValueError("fundamental_coeff requires n >= 2")
    if len(m) != n - 1 or any(v < 0 for v in m):
        raise ValueError("m must be a length-(n-1) multi-index of nonnegative ints")
    nu = tuple(complex(v) for v in np.asarray(nu, dtype=complex))
    if len(nu) != n:
        raise ValueError("nu must have length n")
    return _coeff_cached(n, m, nu)


def coeff_by_recursion(n, m, nu):
    """a_{n,m}(nu) solved from the quadratic recursion alone.

    Forward substitution seeded by a_{n,0} = prod_{i<j} Gamma(nu_i-nu_j+1)^{-1},
    never touching the rank-lowering definitional sum -- an independent route
    for cross-checking fundamental_coeff.  Raises on resonant nu (vanishing
    bracket along the way).
    """
    m = tuple(int(v) for v in m)
    nu = tuple(complex(v) for v in np.asarray(nu, dtype=complex))
    if len(m) != n - 1 or any(v < 0 for v in m):
        raise ValueError("m must be a length-(n-1) multi-index of nonnegative ints")
    seed = 1.0 + 0.0j
    for i in range(n):
        for j in range(i + 1, n):
            seed *= _rg_scalar(nu[i] - nu[j] + 1)
    table = {(0,) * (n - 1): seed}
    for s in range(1, sum(m) + 1):
        for idx in _compositions(s, n - 1):
            if any(idx[i] > m[i] for i in range(n - 1)):
                continue
            b = coeff_bracket(idx, nu)
            if abs(b) < 1e-12:
                raise ArithmeticError(
                    f"resonant nu: recursion bracket vanishes at m={idx}")
            rhs = 0.0 + 0.0j
            for i in range(n - 1):
                if idx[i] >= 1:
                    down = list(idx)
                    down[i] -= 1
                    rhs += table[tuple(down)]
            table[idx] = rhs / b
    return table[m]


def coeff_bracket(m, nu):
    """Quadratic form multiplying a_{n,m} in the coefficient recursion.

    B(m) = sum m_i^2 - sum m_i m_{i+1} + sum (nu_i - nu_{i+1}) m_i.
    Vanishing B (resonant nu) makes the recursion unusable at that m.
    """
    m = np.asarray(m)
    nu = np.asarray(nu, dtype=complex)
    quad = np.sum(m.astype(float) ** 2) - np.sum(m[:-1] * m[1:]).astype(float)
    lin = np.sum((nu[:-1] - nu[1:]) * m)
    return quad + lin


def coeff_recursion_residual(n, nu, max_degree=6, resonance_tol=1e-8,
                             norm="l1"):
    """Max relative residual of B(m) a_{n,m} = sum_i a_{n,m-e_i}.

    Sweeps all m != 0 with |m| <= max_degree in the chosen norm ("l1" total
    degree or "linf" box); resonant m (|B| below resonance_tol) are skipped
    and counted.  Returns (residual, n_skipped).
    """
    worst = 0.0
    skipped = 0
    for m in product(range(max_degree + 1), repeat=n - 1):
        if all(v == 0 for v in m):
            continue
        if norm == "l1" and sum(m) > max_degree:
            continue
        b = coeff_bracket(m, nu)
        if abs(b) < resonance_tol:
            skipped += 1
            continue
        lhs = b * fundamental_coeff(n, m, nu)
        rhs = 0.0 + 0.0j
        for i in range(n - 1):
            if m[i] >= 1:
                down = list(m)
                down[i] -= 1
                rhs += fundamental_coeff(n, tuple(down), nu)
        scale = max(abs(lhs), abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst, skipped


# ---------------------------------------------------------------------------
# fundamental series m_nu and the symmetric combination
# ---------------------------------------------------------------------------

@dataclass
class SeriesValue:
    """Value of a truncated series plus the shell degree actually used."""
    value: complex
    degree: int

    def __float__(self):
        return float(np.real(self.value))


def fundamental_whittaker(nu, x, rel_tol=1e-12, max_degree=200):
    """Fundamental series m_nu(x) = sum_m a_{n,m}(nu) e^{-(m' + nu, x)}.

    m' = sum_i m_i alpha_i over the simple-root directions, so the m-term
    carries exp(-sum_i m_i (x_i - x_{i+1})).  Shells |m|_1 = s are added
    until two consecutive shells are below rel_tol relative to the partial
    sum; the shell degree is recorded.
    """
    nu = np.asarray(nu, dtype=complex)
    x = np.asarray(x, dtype=float)
    n = x.size
    if nu.size != n:
        raise ValueError("nu and x must have the same length")
    base = np.exp(-np.dot(nu, x))
    if n == 1:
        return SeriesValue(complex(base), 0)
    gaps = x[:-1] - x[1:]
    total = 0.0 + 0.0j
    quiet = 0
    degree = 0
    for s in range(max_degree + 1):
        shell_max = 0.0
        for m in _compositions(s, n - 1):
            a = fundamental_coeff(n, m, tuple(nu))
            term = a * np.exp(-np.dot(np.asarray(m, dtype=float), gaps))
            total += term
            shell_max = max(shell_max, abs(term))
        degree = s
        if shell_max <= rel_tol * max(abs(total), 1e-300):
            quiet += 1
            if quiet >= 2 and s >= 2:
                break
        else:
            quiet = 0
    value = base * total
    return SeriesValue(complex(value), degree)


def _compositions(s, parts):
    """All tuples of `parts` nonnegative ints summing to s."""
    if parts == 1:
        yield (s,)
        return
    for first in range(s + 1):
        for rest in _compositions(s - first, parts - 1):
            yield (first,) + rest


def whittaker_from_series(nu, x, rel_tol=1e-12, max_degree=200):
    """Recurrent Whittaker function from the fundamental series:

      psi_nu(x) = prod_{i<j} pi/sin(pi(nu_i - nu_j))
                  * sum_{w in S_n} sgn(w) m_{-w nu}(x).

    Fails for resonant nu (integer differences hit the sine poles).
    Returns a SeriesValue whose degree is the max shell degree used.
    """
    nu = np.asarray(nu, dtype=complex)
    x = np.asarray(x, dtype=float)
    n = x.size
    pref = 1.0 + 0.0j
    for i in range(n):
        for j in range(i + 1, n):
            s = np.sin(np.pi * (nu[i] - nu[j]))
            if abs(s) < 1e-12:
                raise ValueError(
                    "whittaker_from_series: resonant nu (integer difference)")
            pref *= np.pi / s
    acc = 0.0 + 0.0j
    degree = 0
    for perm in permutations(range(n)):
        sgn = _perm_sign(perm)
        sv = fundamental_whittaker(-nu[list(perm)], x, rel_tol, max_degree)
        acc += sgn * sv.value
        degree = max(degree, sv.degree)
    return SeriesValue(pref * acc, degree)


def _perm_sign(perm):
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def toda_eigen_residual(fn, nu, x, step=0.02):
    """Relative eigen-equation residual of a callable under the open chain.

    Applies H = -(1/2) sum_i d^2/dx_i^2 + sum_i exp(x_{i+1} - x_i) to `fn`
    by fourth-order central differences and compares with the eigenvalue
    -(1/2) sum_i nu_i^2 (each pure exponential e^{-c.x} contributes
    -(1/2)|c|^2, and the series coefficients absorb the potential).
    Returns |H f - E f| / |f| at x.
    """
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=complex)
    n = x.size
    f0 = fn(x)
    lap = 0.0
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        second = (-fn(x + 2 * e) + 16 * fn(x + e) - 30 * f0
                  + 16 * fn(x - e) - fn(x - 2 * e)) / (12 * step * step)
        lap += second
    potential = float(np.sum(np.exp(x[1:] - x[:-1])))
    lhs = -0.5 * lap + potential * f0
    energy = -0.5 * np.sum(nu * nu)
    return abs(lhs - energy * f0) / max(abs(f0), 1e-300)


# ---------------------------------------------------------------------------
# theta density (n <= 2)
# ---------------------------------------------------------------------------

def _theta_radius(t, n):
    """Truncation radius for the imaginary-axis integrals.

    The Gaussian factor e^{-|u|^2 t/2} must beat the residual growth of the
    integrand along the difference direction (at most e^{pi |u1-u2|/2} after
    the K-decay/sinh-growth cancellation), plus a safety drop of 46.
    """
    if n == 1:
        return math.sqrt(2.0 * 46.0 / t)
    # along the antidiagonal u = (r, -r): exponent r^2 t - pi r > 46
    return (math.pi + math.sqrt(math.pi ** 2 + 4.0 * t * 46.0)) / (2.0 * t) + 1.0


def _theta_nodes(t, x):
    n = len(x)
    r = _theta_radius(t, n)
    h = min(0.2, math.pi / (3.0 * (1.0 + float(np.max(np.abs(x))))))
    m = int(math.ceil(2.0 * r / h))
    if m % 2 == 1:
        m += 1
    return np.linspace(-r, r, m + 1)


def _theta_setup(t, x):
    x = np.asarray(x, dtype=float)
    t = float(t)
    if t <= 0.0:
        raise ValueError("theta_density requires t > 0")
    if x.size not in (1, 2):
        raise ValueError("theta_density implemented for n <= 2")
    u = _theta_nodes(t, x)
    return t, x, u, float(u[1] - u[0])


def _theta_psi(t, x, u, h):
    """Spectral route: integrate psi_{-i u}(x) against the Plancherel weight."""
    if x.size == 1:
        g = np.exp(-0.5 * t * u * u) * np.cos(u * x[0])
        return float(np.sum(g) * h / TWO_PI)
    m = u.size
    gauss = np.exp(-0.5 * t * u * u)
    sumx = x[0] + x[1]
    z0 = 2.0 * math.exp(0.5 * (x[1] - x[0]))
    dvals = h * np.arange(m)  # difference values on the uniform grid
    kvals = _k_imag_orders(dvals, z0, extra_drop=math.pi * dvals[-1])
    idx = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :])
    Kmat = kvals[idx]
    D = u[:, None] - u[None, :]
    S = u[:, None] + u[None, :]
    sinh_part = D * np.sinh(np.pi * D) / np.pi
    integrand = (2.0 * np.cos(0.5 * S * sumx) * Kmat * sinh_part
                 * np.outer(gauss, gauss))
    return float(np.sum(integrand) * h * h / (TWO_PI ** 2 * 2.0))


def _theta_m(t, x, u, h):
    """Series route: integrate m_lam(x) h(lam) over the imaginary axes."""
    if x.size == 1:
        g = np.exp(-0.5 * t * u * u) * np.cos(u * x[0])
        return float(np.sum(g) * h / TWO_PI)
    m = u.size
    gauss = np.exp(-0.5 * t * u * u)
    dvals = h * np.arange(m)
    svals = _m_series_diff(dvals, x[0] - x[1])  # S(d) for d >= 0
    idx = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :])
    lower = np.arange(m)[:, None] >= np.arange(m)[None, :]
    Smat = np.where(lower, svals[idx], np.conj(svals[idx]))
    phase = np.exp(-1j * np.add.outer(u * x[0], u * x[1]))
    D = u[:, None] - u[None, :]
    val = np.sum(phase * Smat * (1j * D) * np.outer(gauss, gauss))
    val = val * h * h / (TWO_PI ** 2)
    if abs(val.imag) > 1e-8 * max(abs(val.real), 1e-12):
        warnings.warn("theta_density series route: imaginary residue "
                      f"{val.imag:.3e}", stacklevel=3)
    return float(val.real)


def _m_series_diff(dvals, gap):
    """S(d) = sum_m e^{-m gap} / (m! Gamma(i d + m + 1)) for d in dvals.

    Term magnitudes peak before the double-factorial decay kicks in when
    gap < 0; the truncation keeps every term within 50 e-folds of the peak.
    """
    dmax = float(np.max(dvals, initial=0.0))
    ms_all = np.arange(501)
    lg_fact = np.array([math.lgamma(k + 1) for k in ms_all])
    log_bound = -gap * ms_all - 2.0 * lg_fact  # + pi*dmax/2, common to all m
    keep = log_bound >= np.max(log_bound) - 50.0
    mmax = int(np.max(ms_all[keep]))
    ms = np.arange(mmax + 1)
    args = 1j * dvals[:, None] + ms[None, :] + 1.0
    coef = np.exp(-log_gamma(args) - lg_fact[None, : mmax + 1]
                  - gap * ms[None, :])
    return np.sum(coef, axis=1)


def theta_density_forms(t, x):
    """Both evaluation routes for theta_t(x): (psi_route, series_route)."""
    t, x, u, h = _theta_setup(t, x)
    return _theta_psi(t, x, u, h), _theta_m(t, x, u, h)


def theta_density(t, x, rel_tol=1e-6, form="both"):
    """theta_t(x), the heat-like density on the spectral side (n <= 2).

    form = "both" (default) evaluates the function two independent ways --
    once through the recurrent eigenfunctions, once through the power
    series with the polynomial weight -- and raises if they disagree
    beyond rel_tol.  form = "psi" / "m" returns a single route; the psi
    route is the robust one (the series route cancels catastrophically
    once x is deeply anti-ordered, x_{i+1} - x_i >> 1).
    """
    t, x, u, h = _theta_setup(t, x)
    if form == "psi":
        return _theta_psi(t, x, u, h)
    if form == "m":
        return _theta_m(t, x, u, h)
    if form != "both":
        raise ValueError("form must be 'both', 'psi', or 'm'")
    psi_route = _theta_psi(t, x, u, h)
    series_route = _theta_m(t, x, u, h)
    scale = max(abs(psi_route), abs(series_route), 1e-300)
    if abs(psi_route - series_route) > rel_tol * scale:
        raise ArithmeticError(
            f"theta_density routes disagree: {psi_route:.12g} (spectral) vs "
            f"{series_route:.12g} (series)")
    return psi_route
