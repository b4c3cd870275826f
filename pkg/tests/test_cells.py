"""Tests for the matrix-factorization layer.

Oracle policy: algebraic identities are checked in exact rational
arithmetic (Fraction-valued matrices), so equality is literal, not
approximate.  Float routes are compared against independent oracles:
LDU diagonals against ratios of leading minors from ``numpy.linalg.det``,
the driven matrix evolution against adaptive quadrature of analytic
integrands and against closed forms on linear paths, and the plane-
rotation eigensolver against ``numpy.linalg.eigvalsh``.  Distributional
checks (Haar push-forward to triangular patterns) use fixed seeds with
pre-measured healthy p-values.  The factorization-theorem gaps measure
composite-transform discretization: single-letter words agree to
rounding, words repeating a letter lose O(dt) of startup mass, so
those tolerances are frozen from measured first-order-in-dt gaps.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.integrate
import scipy.stats
from hypothesis import given, settings, strategies as st

from whittaker_lab.cells import (
    CellIdentityReport,
    ConsistencyError,
    DecompositionError,
    GeneratorFamily,
    MatrixTrajectory,
    Permutation,
    ReducedWord,
    b_by_iterated_integrals,
    factor_matrices,
    gauss_theorem_check,
    generators,
    haar_gt_check,
    jacobi_eigenvalues,
    ldu,
    lemma_uv_check,
    ode_b,
    one_reduced_word,
    reduced_words,
    sample_haar_unitary,
    sbar,
    spectral_pattern,
    transition_map_u,
    transition_map_v,
    wbar,
)
from whittaker_lab.gtpoly import pattern_type
from whittaker_lab.paths import SampledPath, brownian_sample, canonical_w0_word


def _path(t, cols):
    vals = np.column_stack(cols)
    return SampledPath(t, vals - vals[0])


# ---------------------------------------------------------------------------
# permutations and reduced words
# ---------------------------------------------------------------------------


def test_permutation_basics():
    w = Permutation((3, 1, 4, 2))
    assert w.n == 4 and w(1) == 3 and w(4) == 2
    inv = w.inverse()
    assert (w * inv).images == (1, 2, 3, 4)
    # length equals the brute-force inversion count
    count = sum(w(a) > w(b) for a in range(1, 5) for b in range(a + 1, 5))
    assert w.length() == count == 3
    assert Permutation.longest(4).images == (4, 3, 2, 1)
    with pytest.raises(ValueError):
        Permutation((1, 1, 2))


@given(st.integers(min_value=2, max_value=5).flatmap(
    lambda n: st.tuples(st.permutations(tuple(range(1, n + 1))),
                        st.permutations(tuple(range(1, n + 1))))))
@settings(max_examples=25, deadline=None)
def test_permutation_matrix_is_multiplicative(pair):
    w, v = Permutation(pair[0]), Permutation(pair[1])
    assert np.array_equal(w.matrix() @ v.matrix(), (w * v).matrix())


@given(st.integers(min_value=2, max_value=6).flatmap(
    lambda n: st.permutations(tuple(range(1, n + 1)))))
@settings(max_examples=40, deadline=None)
def test_one_reduced_word_reconstructs(images):
    w = Permutation(images)
    letters = one_reduced_word(w)
    # ReducedWord validates both the product and the length on build
    word = ReducedWord(tuple(letters), w)
    assert len(word) == w.length()


def test_reduced_word_validation():
    with pytest.raises(ValueError):
        ReducedWord((1, 1), Permutation((1, 2)))        # not reduced
    with pytest.raises(ValueError):
        ReducedWord((1,), Permutation((1, 2)))          # wrong product
    with pytest.raises(ValueError):
        ReducedWord((5,), Permutation((2, 1)))          # letter out of range
    word = ReducedWord.from_letters([1, 2, 1], 3)
    assert word.target == Permutation.longest(3)


def test_reduced_words_s3_longest():
    words = reduced_words(Permutation.longest(3))
    assert words == frozenset({(1, 2, 1), (2, 1, 2)})


def test_reduced_words_s4_longest_against_brute_force():
    w0 = Permutation.longest(4)
    # independent oracle: filter all 3^6 letter sequences by product
    brute = set()
    for seq in np.ndindex(*(3,) * 6):
        letters = tuple(i + 1 for i in seq)
        w = Permutation.identity(4)
        for i in letters:
            w = w * Permutation.adjacent(4, i)
        if w == w0:
            brute.add(letters)
    assert reduced_words(w0) == frozenset(brute)
    assert len(brute) == 16


def test_wbar_well_defined_across_words():
    rng = np.random.default_rng(0)
    for _ in range(25):
        images = tuple(int(v) for v in rng.permutation(4) + 1)
        w = Permutation(images)
        mats = [wbar(ReducedWord(word, w)) for word in reduced_words(w)]
        for m in mats[1:]:
            assert np.array_equal(m, mats[0])
        # absolute values give the permutation matrix itself
        assert np.array_equal(np.abs(mats[0]), w.matrix())


def test_canonical_longest_word_matches_paths_module():
    for n in range(2, 6):
        assert ReducedWord.for_longest(n).letters == \
            tuple(canonical_w0_word(n))


# ---------------------------------------------------------------------------
# generators, rotation blocks, factor families
# ---------------------------------------------------------------------------


def test_generator_relations():
    g = generators(4)
    assert isinstance(g, GeneratorFamily) and len(g.h) == 4
    for i in range(3):
        comm = g.e[i] @ g.f[i] - g.f[i] @ g.e[i]
        assert np.array_equal(comm, g.h[i] - g.h[i + 1])
    assert np.array_equal(g.e[0] @ g.e[2], np.zeros((4, 4)))
    assert np.array_equal(g.f[2] @ g.f[0], np.zeros((4, 4)))
    with pytest.raises(ValueError):
        generators(1)


def test_sbar_from_generator_product():
    # the rotation block is (I - e_i)(I + f_i)(I - e_i)
    for n, i in ((2, 1), (3, 1), (3, 2), (4, 2)):
        g = generators(n)
        eye = np.eye(n)
        prod = (eye - g.e[i - 1]) @ (eye + g.f[i - 1]) @ (eye - g.e[i - 1])
        assert np.array_equal(sbar(n, i), prod)
    s = sbar(2, 1)
    assert np.array_equal(s, [[0.0, -1.0], [1.0, 0.0]])
    assert np.array_equal(np.linalg.matrix_power(s, 4), np.eye(2))
    assert np.linalg.det(sbar(3, 2)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sbar(3, 3)


def test_wbar_longest_explicit_matrices():
    assert np.array_equal(wbar(ReducedWord.for_longest(2)),
                          [[0.0, -1.0], [1.0, 0.0]])
    expect3 = [[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]]
    assert np.array_equal(wbar(ReducedWord.from_letters([1, 2, 1], 3)),
                          expect3)
    assert np.array_equal(wbar(ReducedWord.from_letters([2, 1, 2], 3)),
                          expect3)


def test_factor_matrix_forms():
    y = factor_matrices("Y", 1, 2.0, 3)
    assert np.array_equal(y, [[2.0, 0.0, 0.0],
                              [1.0, 0.5, 0.0],
                              [0.0, 0.0, 1.0]])
    x1 = factor_matrices("X", 2, 0.7, 3)
    x2 = factor_matrices("X", 2, 1.1, 3)
    assert np.allclose(x1 @ x2, factor_matrices("X", 2, 1.8, 3),
                       rtol=0.0, atol=1e-15)
    z = factor_matrices("Z", 1, 4.0, 2)
    assert np.array_equal(z, [[4.0, 0.0], [0.0, 0.25]])
    assert np.linalg.det(factor_matrices("Y", 1, 3.7, 2)) == \
        pytest.approx(1.0)
    with pytest.raises(ValueError):
        factor_matrices("Y", 1, 0.0, 2)
    with pytest.raises(ValueError):
        factor_matrices("Q", 1, 1.0, 2)
    with pytest.raises(ValueError):
        factor_matrices("X", 2, 1.0, 2)


def test_factor_matrices_fraction_exact():
    y = factor_matrices("Y", 1, Fraction(2, 3), 3)
    assert y.dtype == object and y[1, 1] == Fraction(3, 2)
    z = factor_matrices("Z", 1, Fraction(5, 7), 2)
    zin = factor_matrices("Z", 1, Fraction(7, 5), 2)
    assert np.array_equal(z @ zin, np.array([[Fraction(1), Fraction(0)],
                                             [Fraction(0), Fraction(1)]],
                                            dtype=object))


# ---------------------------------------------------------------------------
# triangular (LDU) decomposition
# ---------------------------------------------------------------------------


def test_ldu_reconstructs_random_matrices():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4, 5):
        for _ in range(20):
            m = rng.standard_normal((n, n))
            if abs(np.linalg.det(m)) < 1e-3:
                continue
            L, D, U = ldu(m)
            scale = np.abs(m).max()
            assert np.abs(L @ D @ U - m).max() < 1e-12 * scale
            assert np.array_equal(np.triu(L, 1), np.zeros((n, n)))
            assert np.array_equal(np.tril(U, -1), np.zeros((n, n)))
            assert np.all(np.diagonal(L) == 1.0)
            assert np.all(np.diagonal(U) == 1.0)
            assert np.array_equal(D, np.diag(np.diagonal(D)))


def test_ldu_diagonal_is_minor_ratios():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((5, 5)) + 2.0 * np.eye(5)
    _, D, _ = ldu(m)
    minors = [np.linalg.det(m[:k, :k]) for k in range(1, 6)]
    ratios = [minors[0]] + [minors[k] / minors[k - 1] for k in range(1, 5)]
    assert np.abs(np.diagonal(D) - ratios).max() < 1e-10


def test_ldu_exact_rational():
    m = np.array([[Fraction(2), Fraction(1), Fraction(0)],
                  [Fraction(4), Fraction(3), Fraction(1)],
                  [Fraction(2), Fraction(5), Fraction(9)]], dtype=object)
    L, D, U = ldu(m)
    assert np.array_equal(L @ D @ U, m)
    # exact minor-ratio oracle via the 2x2 and 3x3 determinant formulas
    d1 = m[0, 0]
    d2 = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    d3 = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
          - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
          + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    assert [D[k, k] for k in range(3)] == [d1, d2 / d1, d3 / d2]


def test_ldu_two_by_two_hand_form():
    L, D, U = ldu(np.array([[2.0, 3.0], [1.0, 5.0]]))
    assert L[1, 0] == 0.5 and U[0, 1] == 1.5
    assert D[0, 0] == 2.0 and D[1, 1] == 5.0 - 1.5


def test_ldu_vanishing_minor_raises():
    with pytest.raises(DecompositionError):
        ldu(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(DecompositionError):
        # second leading minor vanishes
        ldu(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 1.0], [0.0, 1.0, 1.0]]))
    with pytest.raises(ValueError):
        ldu(np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# transition maps between the two factorization orders (n = 3)
# ---------------------------------------------------------------------------


def test_transition_map_u_example_and_involution():
    out = transition_map_u((Fraction(1), Fraction(1), Fraction(1)))
    assert out == (Fraction(2), Fraction(1), Fraction(1, 2))
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = tuple(Fraction(int(a), int(b))
                  for a, b in rng.integers(1, 40, size=(3, 2)))
        assert transition_map_u(transition_map_u(u), "212->121") == u
    with pytest.raises(ValueError):
        transition_map_u((1.0, 1.0, 1.0), direction="sideways")
    with pytest.raises(ValueError):
        transition_map_u((Fraction(1), Fraction(-1), Fraction(1)))


def test_transition_map_v_example_and_involution():
    out = transition_map_v((Fraction(1), Fraction(1), Fraction(1)))
    assert out == (Fraction(1, 2), Fraction(2), Fraction(1, 2))
    rng = np.random.default_rng(4)
    for _ in range(20):
        v = tuple(Fraction(int(a), int(b))
                  for a, b in rng.integers(1, 40, size=(3, 2)))
        assert transition_map_v(transition_map_v(v)) == v
    with pytest.raises(ValueError):
        transition_map_v((Fraction(1), Fraction(2), Fraction(-1)))


def _product(kind, word, params, n=3):
    out = np.array([[Fraction(int(i == j)) for j in range(n)]
                    for i in range(n)], dtype=object)
    for i, p in zip(word, params):
        out = out @ factor_matrices(kind, i, p, n)
    return out


def test_transition_maps_preserve_matrix_products_exactly():
    rng = np.random.default_rng(5)
    for _ in range(15):
        u = tuple(Fraction(int(a), int(b))
                  for a, b in rng.integers(1, 30, size=(3, 2)))
        assert np.array_equal(_product("Y", [1, 2, 1], u),
                              _product("Y", [2, 1, 2], transition_map_u(u)))
        v = tuple(Fraction(int(a), int(b))
                  for a, b in rng.integers(1, 30, size=(3, 2)))
        assert np.array_equal(_product("X", [1, 2, 1], v),
                              _product("X", [2, 1, 2], transition_map_v(v)))


def test_transition_map_float_products_close():
    rng = np.random.default_rng(6)
    for _ in range(100):
        u = tuple(np.exp(rng.uniform(-2, 2, size=3)))
        a = np.eye(3)
        for i, p in zip([1, 2, 1], u):
            a = a @ factor_matrices("Y", i, p, 3)
        b = np.eye(3)
        for i, p in zip([2, 1, 2], transition_map_u(u)):
            b = b @ factor_matrices("Y", i, p, 3)
        assert np.abs(a - b).max() < 1e-13 * max(np.abs(a).max(), 1.0)


# ---------------------------------------------------------------------------
# diagonal commutation lemma
# ---------------------------------------------------------------------------


def test_lemma_single_letter_hand_form():
    a = [Fraction(2), Fraction(3)]
    v, final = lemma_uv_check(a, [1], [Fraction(5)])
    # v = a_2 / (u a_1); the diagonal picks up the torus factor
    assert v == [Fraction(3, 10)]
    assert final[0, 0] == Fraction(10) and final[1, 1] == Fraction(3, 5)


def test_lemma_identity_diagonal_preserves_determinant():
    u = [Fraction(1, 2), Fraction(4), Fraction(7, 3)]
    v, final = lemma_uv_check([Fraction(1)] * 3, [1, 2, 1], u)
    det = final[0, 0] * final[1, 1] * final[2, 2]
    assert det == Fraction(1)
    assert len(v) == 3 and all(val > 0 for val in v)


def test_lemma_matches_direct_gauss_decomposition():
    # independent oracle: LDU of the assembled product a * Y-product
    a = [Fraction(2), Fraction(3), Fraction(5)]
    u = [Fraction(1, 2), Fraction(4), Fraction(7, 3)]
    v, final = lemma_uv_check(a, [1, 2, 1], u)
    mat = np.array([[a[0], 0, 0], [0, a[1], 0], [0, 0, a[2]]], dtype=object)
    mat = mat @ _product("Y", [1, 2, 1], u)
    L, D, _ = ldu(mat)
    assert np.array_equal(D, final)
    assert np.array_equal(L, _product("X", [1, 2, 1], v))


def test_lemma_validation():
    with pytest.raises(ValueError):
        lemma_uv_check([1.0, 0.0], [1], [1.0])
    with pytest.raises(ValueError):
        lemma_uv_check([1.0, 2.0], [1], [0.0])
    with pytest.raises(ValueError):
        lemma_uv_check([1.0, 2.0], [1], [1.0, 2.0])
    with pytest.raises(ValueError):
        lemma_uv_check(np.array([[1.0, 0.5], [0.0, 2.0]]), [1], [1.0])


# ---------------------------------------------------------------------------
# driven evolution on upper triangular matrices
# ---------------------------------------------------------------------------


def test_ode_b_diagonal_pinned_and_triangular():
    t = np.linspace(0.0, 1.0, 201)
    eta = _path(t, [0.4 * t, np.sin(t)])
    traj = ode_b(eta)
    b = traj.final()
    assert np.array_equal(np.diagonal(b), np.exp(eta.values[-1]))
    assert b[1, 0] == 0.0
    assert np.array_equal(traj.mats[0], np.eye(2))
    one = ode_b(_path(t, [0.3 * t]))
    assert one.final()[0, 0] == pytest.approx(math.exp(0.3), rel=1e-12)


def test_ode_b_n2_against_adaptive_quadrature():
    t = np.linspace(0.0, 2.0, 2001)
    eta = _path(t, [np.sin(t), -0.3 * t])
    b = ode_b(eta, check_tol=1e-10).final()
    oracle, err = scipy.integrate.quad(
        lambda s: math.exp(-0.3 * s - math.sin(s)), 0.0, 2.0,
        epsabs=1e-13, epsrel=1e-13)
    assert err < 1e-10
    target = math.exp(math.sin(2.0)) * oracle
    assert abs(b[0, 1] - target) / target < 5e-7


def test_ode_b_n3_dual_routes_agree_to_rounding():
    t = np.linspace(0.0, 2.0, 2001)
    eta = _path(t, [np.sin(t), 0.2 * np.cos(2 * t), -0.4 * t])
    b = ode_b(eta, check_tol=1e-10).final()   # built-in gate at 1e-10
    ref = b_by_iterated_integrals(eta)
    assert np.abs(b - ref).max() / np.abs(ref).max() < 1e-12
    bm = brownian_sample(3, (0.0, 0.0, 0.0), t_max=1.5, dt=1e-3, rng_seed=42)
    ode_b(bm, check_tol=1e-10)                 # no raise on rough input


def test_ode_b_n3_small_gap_branches_against_quadrature():
    # nearly equal second and third coordinates exercise the series
    # branches of the exact double-integral cells
    for slope, m in ((1e-8, 200), (1e-6, 100)):
        t = np.linspace(0.0, 2.0, m + 1)
        eta = _path(t, [0.3 * t, -0.1 * t, (-0.1 + slope) * t])
        b = ode_b(eta, check_tol=1e-10).final()

        def inner(s, c=slope):
            return math.expm1(c * s) / c

        oracle, err = scipy.integrate.quad(
            lambda s: math.exp(-0.4 * s) * inner(s), 0.0, 2.0,
            epsabs=1e-13, epsrel=1e-13)
        target = math.exp(0.6) * oracle
        assert err < 1e-10
        assert abs(b[0, 2] - target) / target < 1e-9


@given(st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=0.5, max_value=2.0))
@settings(max_examples=15, deadline=None)
def test_ode_b_linear_path_closed_form(a, b_slope, t_max):
    t = np.linspace(0.0, t_max, 51)
    eta = _path(t, [a * t, b_slope * t])
    b = ode_b(eta, check_tol=1e-10).final()
    c = b_slope - a
    ct = c * t_max
    growth = t_max if abs(ct) < 1e-12 else math.expm1(ct) / c
    target = math.exp(a * t_max) * growth
    assert abs(b[0, 1] - target) <= 1e-10 * max(abs(target), 1.0)


def test_ode_b_trajectory_storage_and_validation():
    t = np.linspace(0.0, 1.0, 101)
    eta = _path(t, [0.1 * t, -0.1 * t])
    traj = ode_b(eta, store_every=25)
    assert isinstance(traj, MatrixTrajectory)
    assert traj.times.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert len(traj) == 5
    shifted = SampledPath(t, np.column_stack([0.1 * t + 1.0, -0.1 * t]))
    with pytest.raises(ValueError):
        ode_b(shifted)
    with pytest.raises(ValueError):
        b_by_iterated_integrals(shifted)
    wide = brownian_sample(4, (0.0,) * 4, t_max=0.2, dt=0.01, rng_seed=0)
    with pytest.raises(ValueError):
        b_by_iterated_integrals(wide)


# ---------------------------------------------------------------------------
# the factorization theorem, matrix route vs transform route
# ---------------------------------------------------------------------------


def test_gauss_theorem_single_letter_exact():
    bm = brownian_sample(2, (0.1, -0.1), t_max=1.5, dt=1e-3, rng_seed=2)
    rep = gauss_theorem_check(bm, [1])
    assert isinstance(rep, CellIdentityReport)
    assert rep.passed and rep.boundary is None
    assert rep.time == pytest.approx(1.5)
    assert rep.letters == (1,)
    assert len(rep.u) == 1 and len(rep.v) == 1
    for gap in (rep.diag_gap, rep.unipotent_gap, rep.lower_gap,
                rep.lemma_gap):
        assert gap < 1e-12
    bm3 = brownian_sample(3, (0.0, 0.0, 0.0), t_max=1.0, dt=1e-3, rng_seed=9)
    for word in ([1], [2]):
        rep = gauss_theorem_check(bm3, word)
        assert rep.diag_gap < 1e-12 and rep.lower_gap < 1e-12


def test_gauss_theorem_longest_words_within_startup_tolerance():
    for seed in (1, 2):
        bm = brownian_sample(3, (0.0, 0.0, 0.0), t_max=1.0, dt=1e-3,
                             rng_seed=seed)
        for word in ([1, 2, 1], [2, 1, 2]):
            rep = gauss_theorem_check(bm, word)
            assert rep.passed, (seed, word, rep)
            assert rep.diag_gap < 2e-2
            assert rep.lemma_gap < 2e-2


def test_gauss_theorem_gap_is_first_order_in_step():
    fine = brownian_sample(3, (0.0, 0.0, 0.0), t_max=1.0, dt=1.25e-4,
                           rng_seed=7)
    coarse = gauss_theorem_check(fine.subsample(8), [1, 2, 1]).diag_gap
    finer = gauss_theorem_check(fine.subsample(4), [1, 2, 1]).diag_gap
    assert finer < coarse
    assert 0.3 < finer / coarse < 0.7


def test_gauss_theorem_distinct_letter_words_much_tighter():
    bm3 = brownian_sample(3, (0.0, 0.0, 0.0), t_max=1.0, dt=1e-3, rng_seed=9)
    for word in ([1, 2], [2, 1]):
        rep = gauss_theorem_check(bm3, word)
        assert rep.diag_gap < 1e-5 and rep.lower_gap < 1e-5
    bm4 = brownian_sample(4, (0.0,) * 4, t_max=0.8, dt=1e-3, rng_seed=3)
    rep = gauss_theorem_check(bm4, [1, 2, 3])
    assert rep.passed and rep.diag_gap < 1e-4
    rep = gauss_theorem_check(bm4, [2, 1, 3, 2])
    assert rep.passed and rep.diag_gap < 5e-4


def test_gauss_theorem_time_truncation_and_validation():
    bm = brownian_sample(2, (0.0, 0.0), t_max=2.0, dt=1e-3, rng_seed=11)
    rep = gauss_theorem_check(bm, [1], t=1.0)
    assert rep.time == pytest.approx(1.0) and rep.passed
    with pytest.raises(ValueError):
        gauss_theorem_check(bm, [1, 1])
    bm3 = brownian_sample(3, (0.0, 0.0, 0.0), t_max=0.5, dt=1e-3, rng_seed=1)
    with pytest.raises(ValueError):
        gauss_theorem_check(bm3, [3])


# ---------------------------------------------------------------------------
# eigensolver, Haar sampling, pattern push-forward
# ---------------------------------------------------------------------------


def test_jacobi_eigenvalues_against_eigvalsh():
    rng = np.random.default_rng(8)
    for n in (1, 2, 3, 4, 6, 8):
        for _ in range(10):
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            H = (g + g.conj().T) / 2.0
            ev = jacobi_eigenvalues(H)
            ref = np.sort(np.linalg.eigvalsh(H))[::-1]
            scale = max(float(np.abs(ref).max()), 1.0)
            assert np.abs(ev - ref).max() < 1e-12 * scale
            assert np.all(np.diff(ev) <= 0)


def test_jacobi_does_not_mutate_input():
    rng = np.random.default_rng(9)
    g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = (g + g.conj().T) / 2.0
    keep = H.copy()
    jacobi_eigenvalues(H)
    assert np.array_equal(H, keep)


def test_haar_unitary_is_unitary_and_deterministic():
    U = sample_haar_unitary(4, np.random.default_rng(10))
    assert np.abs(U @ U.conj().T - np.eye(4)).max() < 1e-12
    V = sample_haar_unitary(4, np.random.default_rng(10))
    assert np.array_equal(U, V)


def test_haar_top_left_entry_uniform_rank2():
    # conjugating diag(1, 0) by Haar makes the (1,1) entry exactly
    # uniform on [0, 1]; this pins the phase convention of the sampler
    rng = np.random.default_rng(5)
    vals = np.empty(4000)
    for k in range(4000):
        U = sample_haar_unitary(2, rng)
        M = (U * np.array([1.0, 0.0])) @ U.conj().T
        vals[k] = spectral_pattern((M + M.conj().T) / 2.0).rows[0][0]
    assert scipy.stats.kstest(vals, "uniform").pvalue > 0.01


def test_spectral_pattern_interlaces_with_matching_type():
    rng = np.random.default_rng(12)
    x = np.array([1.7, 0.4, -0.6, -2.1])
    for _ in range(25):
        U = sample_haar_unitary(4, rng)
        M = (U * x[None, :]) @ U.conj().T
        M = (M + M.conj().T) / 2.0
        P = spectral_pattern(M)
        assert P.interlacing_ok(tol=1e-10)
        assert np.abs(pattern_type(P) - np.real(np.diagonal(M))).max() < 1e-10
        assert np.abs(np.asarray(P.rows[-1]) - x).max() < 1e-10


def test_haar_gt_check_rank2_and_rank3():
    g = haar_gt_check((1.0, 0.0), samples=2000, rng_seed=0)
    assert g.passed
    assert g.details["interlace_violation"] < 1e-12
    assert g.details["type_gap"] < 1e-12
    assert all(p > 0.01 for p in g.details["ks_pvalues"].values())
    assert g.details["mean_diag_sigmas"] < 3.0
    g3 = haar_gt_check((1.2, 0.0, -1.2), samples=2000, rng_seed=1)
    assert g3.passed
    assert set(g3.details["ks_pvalues"]) == \
        {"row1_entry1", "row2_entry1", "row2_entry2"}


def test_haar_gt_check_rank4_and_validation():
    g4 = haar_gt_check((2.0, 0.7, -0.5, -2.2), samples=1500, rng_seed=2)
    assert g4.passed and g4.details["interlace_violation"] < 1e-12
    with pytest.raises(ValueError):
        haar_gt_check((0.0, 1.0), samples=100, rng_seed=0)
    with pytest.raises(ValueError):
        haar_gt_check((4.0, 3.0, 2.0, 1.0, 0.0), samples=100, rng_seed=0)


def test_haar_gt_check_deterministic():
    a = haar_gt_check((1.0, 0.0), samples=400, rng_seed=7)
    b = haar_gt_check((1.0, 0.0), samples=400, rng_seed=7)
    assert a.p_value == b.p_value and a.passed == b.passed
