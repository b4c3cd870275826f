"""Tests for the Whittaker evaluator routes and their cross-checks.

Oracle policy: the rank-2 closed form is checked through macdonald_K (which
test_specfun pins against its own series oracles); rank-3 routes are checked
against each other pairwise (they share no code path past the window
helpers: layered kernel recursion, direct triangular-array tensor grid,
positive-coordinate grid, importance sampling, and the convergent series
from specfun).  The kernel eigen-identity is checked by finite differences.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whittaker_lab._quad import QuadratureError
from whittaker_lab.gtpoly import TriangularArray
from whittaker_lab.specfun import (hciz_J, log_gamma, macdonald_K,
                                   whittaker_from_series)
from whittaker_lab.givental import (QuadSpec, WhittakerEval, asymptotic_check,
                                    baxter_identity_residual, baxter_kernel,
                                    conditional_kernel_k, eigen_residual,
                                    givental_energy, lusztig_r,
                                    whittaker_energy_integral,
                                    whittaker_givental_mc,
                                    whittaker_lusztig_n3,
                                    whittaker_quadrature,
                                    zero_temperature_limit)


def closed_form_n2(lam, x):
    """2 e^{(lam1+lam2)(x1+x2)/2} K_{lam1-lam2}(2 e^{(x2-x1)/2})."""
    return (2.0 * math.exp((lam[0] + lam[1]) * (x[0] + x[1]) / 2.0)
            * macdonald_K(lam[0] - lam[1], 2.0 * math.exp((x[1] - x[0]) / 2.0)))


def _clear_of_integers(g, margin):
    return abs(g - round(g)) >= margin


def _draw_chamber_spectral(rng, n):
    """Strictly decreasing lam whose pairwise gaps stay away from integers
    (the series route loses digits near the sine poles of its prefactor)."""
    while True:
        gaps = rng.uniform(0.3, 2.4, size=n - 1)
        lam = np.concatenate([[0.0], -np.cumsum(gaps)])
        lam = lam - lam.mean() + rng.uniform(-0.7, 0.7)
        pair = [lam[i] - lam[j] for i in range(n) for j in range(i + 1, n)]
        if all(_clear_of_integers(g, 0.25) for g in pair):
            return lam


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


def test_kernel_at_origin():
    assert baxter_kernel(0.0, (0.0, 0.0), (0.0,)) == pytest.approx(
        math.exp(-2.0), rel=1e-15)


def test_kernel_simple_substitution():
    assert baxter_kernel(1.0, (1.0, 0.0), (1.0,)) == pytest.approx(
        math.exp(-1.0 - 1.0 / math.e), rel=1e-15)


def test_kernel_positive_and_shape_checked():
    assert baxter_kernel(-0.4, (0.9, -0.2, -1.1), (0.5, -0.6)) > 0.0
    with pytest.raises(ValueError):
        baxter_kernel(0.0, (1.0, 0.0), (0.5, 0.2))


def test_kernel_eigen_identity_at_50_random_points():
    rng = np.random.default_rng(20260818)
    for trial in range(50):
        n = 2 if trial % 2 == 0 else 3
        theta = rng.uniform(-1.0, 1.0)
        x = rng.uniform(-1.5, 1.5, size=n)
        y = rng.uniform(-1.5, 1.5, size=n - 1)
        assert baxter_identity_residual(theta, x, y) < 1e-5


# ---------------------------------------------------------------------------
# energy function and rate functions
# ---------------------------------------------------------------------------


def test_energy_rank1_is_linear():
    T = TriangularArray([np.array([0.7])])
    assert givental_energy((1.3,), T) == pytest.approx(1.3 * 0.7, rel=1e-15)


def test_energy_rank2_by_hand():
    T = TriangularArray([np.array([0.2]), np.array([0.5, -0.4])])
    expected = (0.9 * 0.2 - 0.3 * (0.5 - 0.4 - 0.2)
                - math.exp(0.2 - 0.5) - math.exp(-0.4 - 0.2))
    assert givental_energy((0.9, -0.3), T) == pytest.approx(expected,
                                                            rel=1e-14)


@given(st.floats(-3.0, 3.0),
       st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8),
       st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
@settings(max_examples=60, deadline=None)
def test_energy_global_shift_moves_spectral_part_only(c, l1, l2, l3,
                                                      u, s, t):
    lam = (l1, l2, l3)
    rows = [np.array([u]), np.array([s, t]), np.array([0.9, 0.1, -0.7])]
    base = givental_energy(lam, TriangularArray(rows))
    shifted = givental_energy(lam, TriangularArray([r + c for r in rows]))
    assert shifted - base == pytest.approx(c * sum(lam), abs=1e-9)


def test_rate_functions():
    r1, r2 = lusztig_r((1.0, 2.0, 1.0))
    assert (r1, r2) == (1.0, 1.0)
    r1, r2 = lusztig_r((0.5, 4.0, 2.0))
    assert r1 == pytest.approx(2.0, rel=1e-15)
    assert r2 == pytest.approx(2.5 / 8.0, rel=1e-15)


@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0), st.floats(0.01, 50.0),
       st.floats(0.01, 20.0), st.floats(0.01, 20.0))
@settings(max_examples=80, deadline=None)
def test_importance_weights_never_exceed_one(v1, v2, v3, a1, a2):
    r1, r2 = lusztig_r((v1, v2, v3))
    assert r1 > 0.0 and r2 > 0.0
    assert math.exp(-a1 * r1 - a2 * r2) <= 1.0


# ---------------------------------------------------------------------------
# quadrature route
# ---------------------------------------------------------------------------


def test_quadrature_rank1_exact():
    ev = whittaker_quadrature((0.6,), (1.1,))
    assert float(ev) == pytest.approx(math.exp(0.6 * 1.1), rel=1e-15)
    assert ev.est_error == 0.0


def test_quadrature_rank2_matches_closed_form():
    lam, x = (0.9, -0.9), (0.4, -0.6)
    ev = whittaker_quadrature(lam, x)
    assert float(ev) == pytest.approx(closed_form_n2(lam, x), rel=1e-8)


def test_quadrature_rank2_general_spectral_point():
    lam, x = (1.3, 0.2), (0.5, -0.4)
    ev = whittaker_quadrature(lam, x)
    assert float(ev) == pytest.approx(closed_form_n2(lam, x), rel=1e-8)


def test_quadrature_rank2_anti_ordered_position():
    lam, x = (0.8, -0.5), (-1.0, 1.0)
    ev = whittaker_quadrature(lam, x)
    assert float(ev) == pytest.approx(closed_form_n2(lam, x), rel=1e-8)


def test_quadrature_complex_spectral_regular_real_part():
    lam = np.array([0.8 + 0.2j, -0.3 - 0.2j])
    x = np.array([0.4, -0.3])
    q = whittaker_quadrature(lam, x)
    s = whittaker_from_series(lam, x)
    assert abs(q.value - s.value) < 1e-8 * abs(s.value)


def test_quadrature_rank3_matches_positive_coordinate_route():
    lam, x = (0.8, 0.1, -0.6), (0.7, 0.0, -0.5)
    q = whittaker_quadrature(lam, x)
    lz = whittaker_lusztig_n3(lam, x)
    tol = 3.0 * (q.est_error + lz.est_error) + 1e-9 * abs(float(q))
    assert abs(float(q) - float(lz)) < tol


def test_quadrature_rejects_high_rank():
    with pytest.raises(ValueError):
        whittaker_quadrature((1.0, 0.5, -0.5, -1.0), (1.0, 0.5, -0.5, -1.0))


def test_quadrature_refuses_unattainable_tolerance():
    with pytest.raises(QuadratureError):
        whittaker_quadrature((0.005, 0.0), (120.0, 0.0),
                             QuadSpec(rel_tol=1e-16, max_refine=0))


def test_eval_record_rejects_bad_values():
    with pytest.raises(ArithmeticError):
        WhittakerEval(float("nan"), 0.0, "quadrature")
    with pytest.raises(ArithmeticError):
        WhittakerEval(1.0, -1e-3, "quadrature")


# ---------------------------------------------------------------------------
# Monte Carlo route
# ---------------------------------------------------------------------------


def test_mc_rank2_matches_closed_form_within_3_sigma():
    lam, x = (1.0, -1.0), (0.3, -0.2)
    mc = whittaker_givental_mc(lam, x, samples=1_000_000, rng_seed=1)
    assert abs(float(mc) - closed_form_n2(lam, x)) < 3.0 * mc.est_error


def test_mc_rank3_matches_quadrature_within_3_sigma():
    lam, x = (0.8, 0.1, -0.6), (0.7, 0.0, -0.5)
    mc = whittaker_givental_mc(lam, x, samples=400_000, rng_seed=7)
    q = whittaker_quadrature(lam, x)
    assert abs(float(mc) - float(q)) < 3.0 * (mc.est_error + q.est_error)


def test_mc_deterministic_for_fixed_seed():
    a = whittaker_givental_mc((0.9, -0.4), (0.2, -0.1), samples=50_000,
                              rng_seed=11)
    b = whittaker_givental_mc((0.9, -0.4), (0.2, -0.1), samples=50_000,
                              rng_seed=11)
    assert float(a) == float(b)


def test_mc_rejects_spectral_point_outside_open_chamber():
    with pytest.raises(ValueError):
        whittaker_givental_mc((0.0, 1.0), (0.5, -0.5), samples=1000)
    with pytest.raises(ValueError):
        whittaker_givental_mc((1.0, 1.0), (0.5, -0.5), samples=1000)


# ---------------------------------------------------------------------------
# explicit rank-3 positive-coordinate route
# ---------------------------------------------------------------------------


def test_lusztig_matches_triangular_array_form():
    lam, x = (0.8, 0.1, -0.6), (0.7, 0.0, -0.5)
    lz = whittaker_lusztig_n3(lam, x)
    ta = whittaker_energy_integral(lam, x)
    tol = 3.0 * (lz.est_error + ta.est_error) + 1e-9 * abs(float(lz))
    assert abs(float(lz) - float(ta)) < tol
    assert lz.route == "lusztig" and ta.route == "lusztig"
    assert lz.meta["form"] != ta.meta["form"]


def test_lusztig_huge_gaps_approach_gamma_product():
    lam = np.array([1.5, 0.0, -1.5])
    x = np.array([12.0, 0.0, -12.0])
    lz = whittaker_lusztig_n3(lam, x)
    target = math.exp(float(lam @ x)
                      + sum(log_gamma(t).real for t in (1.5, 3.0, 1.5)))
    assert float(lz) == pytest.approx(target, rel=1e-4)


def test_lusztig_requires_open_chamber():
    with pytest.raises(ValueError):
        whittaker_lusztig_n3((0.5, 0.5, -1.0), (0.3, 0.0, -0.3))


# ---------------------------------------------------------------------------
# asymptotics and the zero-temperature limit
# ---------------------------------------------------------------------------


def test_asymptotic_rank2_gap_10():
    value, target = asymptotic_check((1.0, -1.0), 10.0)
    assert abs(value / target - 1.0) < 1e-3


def test_asymptotic_rank3_gap_8():
    value, target = asymptotic_check((1.5, 0.0, -1.5), 8.0)
    assert abs(value / target - 1.0) < 1e-2


def test_asymptotic_bound_holds_down_to_zero_gap():
    for lam in [(1.0, -1.0), (0.8, 0.1, -0.6)]:
        for gap in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0):
            value, target = asymptotic_check(lam, gap)
            assert value <= target * (1.0 + 1e-9)


def test_zero_temperature_rank1_exact_at_any_scale():
    for beta in (1.0, 13.0, 400.0):
        z = zero_temperature_limit((0.7,), (0.4,), beta)
        assert z == pytest.approx(math.exp(0.7 * 0.4), rel=1e-12)


def test_zero_temperature_rank2_near_determinant_ratio():
    lam = np.array([1.0, 0.0])
    x1 = np.array([1.0, 0.0])
    # at this position the beta=50 prelimit still carries a ~2.5% 1/beta
    # correction; the wider-gap point below is inside 2%
    z = zero_temperature_limit(lam, x1, 50.0)
    assert abs(z - hciz_J(lam, x1)) < 0.03 * abs(hciz_J(lam, x1))
    x2 = np.array([2.0, 0.0])
    z2 = zero_temperature_limit(lam, x2, 50.0)
    assert abs(z2 - hciz_J(lam, x2)) < 0.02 * abs(hciz_J(lam, x2))


def test_zero_temperature_converges_first_order():
    lam = np.array([1.0, 0.0])
    x = np.array([1.0, 0.0])
    J = hciz_J(lam, x)
    gaps = [abs(zero_temperature_limit(lam, x, b) - J) / abs(J)
            for b in (50.0, 100.0, 200.0)]
    for a, b in zip(gaps, gaps[1:]):
        assert 0.40 < b / a < 0.62


# ---------------------------------------------------------------------------
# eigenvalue-equation residual
# ---------------------------------------------------------------------------


def test_eigen_residual_rank1():
    assert eigen_residual((0.0,), (0.5,)) < 1e-10
    assert eigen_residual((0.3,), (0.5,)) < 1e-8


def test_eigen_residual_rank2_small():
    assert eigen_residual((0.7, -0.7), (0.3, -0.3), h=1e-3) < 1e-5


def test_eigen_residual_scales_quadratically_in_stencil_width():
    r1 = eigen_residual((0.7, -0.7), (0.3, -0.3), h=1e-3)
    r2 = eigen_residual((0.7, -0.7), (0.3, -0.3), h=2e-3)
    r4 = eigen_residual((0.7, -0.7), (0.3, -0.3), h=4e-3)
    assert 3.3 < r2 / r1 < 4.8
    assert 3.3 < r4 / r2 < 4.8


def test_eigen_residual_rank3():
    assert eigen_residual((0.6, 0.1, -0.5), (0.4, 0.0, -0.3), h=2e-3) < 1e-5


# ---------------------------------------------------------------------------
# conditional kernels
# ---------------------------------------------------------------------------


def test_conditional_kernel_rank2_value():
    assert conditional_kernel_k(2, (0.0, 0.0), (0.0,)) == pytest.approx(
        math.exp(-2.0), rel=1e-15)


def test_conditional_kernel_rank2_normalizes_to_ground_state():
    from scipy.integrate import quad
    x = (0.6, -0.2)
    total, _ = quad(lambda y: conditional_kernel_k(2, x, (y,)), -30.0, 30.0,
                    epsabs=1e-13, epsrel=1e-13)
    psi0 = 2.0 * macdonald_K(0.0, 2.0 * math.exp((x[1] - x[0]) / 2.0))
    assert total == pytest.approx(psi0, rel=1e-6)


def test_conditional_kernel_rank3_positive_and_symmetric():
    x = (0.5, 0.0, -0.4)
    for y in [(0.3, -0.1), (0.0, 0.0), (-0.7, 0.9)]:
        k = conditional_kernel_k(3, x, y)
        assert k > 0.0
        assert k == pytest.approx(conditional_kernel_k(3, x, (y[1], y[0])),
                                  rel=1e-12)


def test_conditional_kernel_rejects_bad_shapes():
    with pytest.raises(ValueError):
        conditional_kernel_k(2, (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError):
        conditional_kernel_k(4, (0.0,) * 4, (0.0,) * 3)


# ---------------------------------------------------------------------------
# cross-route invariants
# ---------------------------------------------------------------------------


def _route_values(lam, x, mc_seed):
    """All implemented routes at (lam, x) as (value, reported error)."""
    n = len(lam)
    out = [(v := whittaker_quadrature(lam, x), float(v), v.est_error)]
    mc = whittaker_givental_mc(lam, x, samples=300_000, rng_seed=mc_seed)
    out.append((mc, float(mc), mc.est_error))
    sv = whittaker_from_series(np.asarray(lam), np.asarray(x))
    out.append((None, float(sv.value.real), 0.0))
    if n == 3:
        lz = whittaker_lusztig_n3(lam, x)
        out.append((lz, float(lz), lz.est_error))
        ta = whittaker_energy_integral(lam, x)
        out.append((ta, float(ta), ta.est_error))
    return [(v, e) for _, v, e in out]


def test_route_agreement_at_20_random_spectral_positions():
    rng = np.random.default_rng(99)
    for trial in range(20):
        n = 2 if trial < 10 else 3
        lam = _draw_chamber_spectral(rng, n)
        x = rng.uniform(-1.2, 1.2, size=n)
        vals = _route_values(tuple(lam), tuple(x), mc_seed=trial)
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                vi, ei = vals[i]
                vj, ej = vals[j]
                tol = 3.0 * (ei + ej) + 1e-9 * abs(vi)
                assert abs(vi - vj) < tol, (
                    f"routes {i},{j} disagree at lam={lam}, x={x}: "
                    f"{vi} vs {vj} (tol {tol})")


@given(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4),
       st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_spectral_symmetry_rank2(l1, l2, x1, x2):
    a = float(whittaker_quadrature((l1, l2), (x1, x2)))
    b = float(whittaker_quadrature((l2, l1), (x1, x2)))
    assert abs(a - b) <= 1e-6 * max(abs(a), 1e-300)


def test_spectral_symmetry_rank3_all_permutations():
    from itertools import permutations
    lam = (0.9, 0.2, -0.5)
    x = (0.6, 0.0, -0.4)
    base = float(whittaker_quadrature(lam, x))
    for p in permutations(lam):
        assert abs(float(whittaker_quadrature(p, x)) - base) <= 1e-6 * base
