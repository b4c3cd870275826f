"""Tests for whittaker_lab.gtpoly.

The Monte Carlo assertions use pinned seeds; tolerances are 3-4 sigma of
the measured spread (or frozen absolute bands where stated).
"""

import math

import numpy as np
import pytest

from whittaker_lab import gtpoly as gt
from whittaker_lab.specfun import hciz_J

# ---------------------------------------------------------------------------
# types and the type map
# ---------------------------------------------------------------------------


def test_pattern_type_examples():
    assert gt.pattern_type(gt.GTPattern([[3.7]])) == pytest.approx([3.7])
    P = gt.GTPattern([[1.0], [2.0, 0.0]])
    assert gt.pattern_type(P) == pytest.approx([1.0, 1.0])


def test_pattern_type_sums_to_bottom_row():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = np.sort(rng.uniform(-3, 3, 4))[::-1]
        x += np.arange(4)[::-1] * 0.05  # enforce strict decrease
        P = gt.gt_gibbs_sample(x, sweeps=10, rng_seed=rng.integers(1 << 30))
        assert np.sum(gt.pattern_type(P)) == pytest.approx(np.sum(x), rel=1e-12)


def test_triangular_row_shape_validation():
    with pytest.raises(ValueError):
        gt.TriangularArray([[1.0], [2.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# Gibbs sampler
# ---------------------------------------------------------------------------


def test_gibbs_rejects_unordered_x():
    with pytest.raises(ValueError):
        gt.GibbsSampler(np.array([0.0, 1.0]), 1)
    with pytest.raises(ValueError):
        gt.GibbsSampler(np.array([1.0, 1.0]), 1)


def test_gibbs_n2_uniform_mean():
    # single free coordinate ~ Uniform[0,1]; each sweep is an exact iid draw
    sampler = gt.GibbsSampler(np.array([1.0, 0.0]), 2026)
    vals = np.empty(100_000)
    for i in range(vals.size):
        sampler.sweep()
        vals[i] = sampler.pattern.rows[0][0]
    assert abs(np.mean(vals) - 0.5) < 0.005  # frozen band
    # Kolmogorov-Smirnov against Uniform[0,1] at level 0.01
    ks = np.max(np.abs(np.sort(vals) - (np.arange(1, vals.size + 1) / vals.size)))
    assert ks * math.sqrt(vals.size) < 1.63


def test_gibbs_deterministic_given_seed():
    a = gt.gt_gibbs_sample(np.array([2.0, 1.0, 0.0]), 40, rng_seed=99)
    b = gt.gt_gibbs_sample(np.array([2.0, 1.0, 0.0]), 40, rng_seed=99)
    for ra, rb in zip(a.rows, b.rows):
        assert np.array_equal(ra, rb)


def test_gibbs_preserves_interlacing_every_sweep():
    x = np.array([1.7, 0.4, -0.6, -2.0])
    sampler = gt.GibbsSampler(x, 7)
    assert sampler.pattern.interlacing_ok()
    for _ in range(200):
        sampler.sweep()
        assert sampler.pattern.interlacing_ok()
        assert np.array_equal(sampler.pattern.bottom_row, x)


def test_gibbs_type_matches_haar_pushforward():
    # uniform-measure type vector vs the diagonal of a Haar-conjugated
    # Hermitian matrix with the same spectrum (independent oracle)
    x = np.array([2.0, 1.0, 0.0])
    sampler = gt.GibbsSampler(x, 11)
    sampler.sweep(50)
    n_mc = 20_000
    types = np.empty((n_mc, 3))
    for i in range(n_mc):
        sampler.sweep(5)
        types[i] = gt.pattern_type(sampler.pattern)

    rng = np.random.default_rng(12)
    diags = np.empty((n_mc, 3))
    X = np.diag(x)
    for i in range(n_mc):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        q, r = np.linalg.qr(g)
        q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
        diags[i] = np.real(np.diagonal(q @ X @ q.conj().T))

    for k in range(3):
        se = math.sqrt(np.var(types[:, k]) / n_mc + np.var(diags[:, k]) / n_mc)
        assert abs(np.mean(types[:, k]) - np.mean(diags[:, k])) < 3 * se


# ---------------------------------------------------------------------------
# volume
# ---------------------------------------------------------------------------


def test_volume_n2_interval_length():
    v = gt.gt_volume(np.array([1.3, -0.4]), method="limit")
    assert v.value == pytest.approx(1.7, rel=1e-12)
    r = gt.gt_volume(np.array([1.3, -0.4]), method="rejection", rng_seed=5)
    assert r.value == pytest.approx(1.7, rel=1e-12)  # box == polytope at n=2


def test_volume_n3_rejection_adjudicates_constant():
    # exact volume at x=(2,1,0) is 1; the limit route must equal it, i.e.
    # the constant is prod(j!)^{-1} h(x), not its inverse
    x = np.array([2.0, 1.0, 0.0])
    lim = gt.gt_volume(x, method="limit")
    assert lim.value == pytest.approx(1.0, rel=1e-10)
    rej = gt.gt_volume(x, method="rejection", samples=400_000, rng_seed=17)
    assert abs(rej.value - lim.value) < 4 * rej.stderr


def test_volume_scaling_and_translation():
    x = np.array([1.1, 0.2, -0.7, -1.5])
    base = gt.gt_volume(x, method="limit").value
    scaled = gt.gt_volume(2.5 * x, method="limit").value
    assert scaled == pytest.approx(2.5 ** 6 * base, rel=1e-9)
    shifted = gt.gt_volume(x + 3.0, method="limit").value
    assert shifted == pytest.approx(base, rel=1e-9)


def test_volume_rejects_bad_input():
    with pytest.raises(ValueError):
        gt.gt_volume(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        gt.gt_volume(np.arange(5.0)[::-1], method="rejection")
    with pytest.raises(ValueError):
        gt.gt_volume(np.array([1.0, 0.0]), method="nope")


# ---------------------------------------------------------------------------
# Monte Carlo route to J
# ---------------------------------------------------------------------------


def test_dh_at_zero_lam_is_volume():
    x = np.array([1.5, 0.3, -0.9])
    est, se = gt.dh_estimate_J(np.zeros(3), x, samples=500, rng_seed=1)
    assert est == pytest.approx(gt.gt_volume(x).value, rel=1e-12)


def test_dh_n2_quadrature_oracle():
    # type = (t, 1-t) with t ~ U[0,1]: E[e^{lam.type}] = int_0^1 e^t dt = e-1
    est, se = gt.dh_estimate_J(np.array([1.0, 0.0]), np.array([1.0, 0.0]),
                               samples=20_000, rng_seed=2)
    assert se < 0.02
    assert abs(est - (math.e - 1.0)) < 3 * se


def test_dh_n3_matches_determinant_route():
    lam = np.array([1.0, 0.0, -1.0])
    x = np.array([2.0, 1.0, 0.0])
    est, se = gt.dh_estimate_J(lam, x, samples=20_000, rng_seed=3)
    ref = hciz_J(lam, x)
    assert abs(est - ref) < 3 * se
    assert se / ref < 0.05


def test_dh_symmetric_in_lam():
    lam = np.array([0.8, -0.2, -0.6])
    x = np.array([1.0, 0.0, -1.0])
    a, sa = gt.dh_estimate_J(lam, x, samples=15_000, rng_seed=4)
    b, sb = gt.dh_estimate_J(lam[[2, 0, 1]], x, samples=15_000, rng_seed=5)
    assert abs(a - b) < 3 * math.hypot(sa, sb)


def test_dh_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        gt.dh_estimate_J(np.zeros(2), np.array([2.0, 1.0, 0.0]), samples=10)
