import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import null_space

from hslra.errors import ArgumentError, RankMismatchError
from hslra.hankel import (
    HankelStructure,
    LrrCoefficients,
    antidiag_weights,
    embed,
    minimal_lrr,
    multiplication_matrix,
    project_hankel,
    project_hankel_weighted,
    rank_profile,
)
from hslra.linalg import QrWeights, qr_norm

from helpers import random_finite_rank

series = st.integers(2, 25).flatmap(
    lambda n: arrays(np.float64, n, elements=st.floats(-100, 100, allow_nan=False)))


def random_spd(rng, n):
    x = rng.standard_normal((n, n))
    return x @ x.T + n * np.eye(n)


def test_embed_pattern():
    np.testing.assert_array_equal(embed([1, 2, 3, 4, 5], 2), [[1, 2, 3, 4], [2, 3, 4, 5]])
    np.testing.assert_array_equal(embed(np.zeros(6), 3), np.zeros((3, 4)))


def test_embed_geometric_is_rank_one():
    s = np.linalg.svd(embed([1, 2, 4, 8, 16], 2), compute_uv=False)
    assert s[1] < 1e-12 * s[0]


@pytest.mark.parametrize("window", [0, 6])
def test_embed_rejects_bad_window(window):
    with pytest.raises(ArgumentError):
        embed(np.arange(5.0), window)


def test_structure_shape():
    h = HankelStructure(20, 10)
    assert h.shape == (10, 11) and h.cols + h.window - 1 == 20


@pytest.mark.parametrize("n, window, expected", [
    (5, 2, [1, 2, 2, 2, 1]),
    (5, 3, [1, 2, 3, 2, 1]),
    (5, 4, [1, 2, 2, 2, 1]),
])
def test_antidiag_weights(n, window, expected):
    np.testing.assert_array_equal(antidiag_weights(n, window), expected)


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))))
def test_antidiag_weights_count_entries(nw):
    n, window = nw
    kappa = antidiag_weights(n, window)
    assert kappa.sum() == window * (n - window + 1)
    # direct count of entries on each antidiagonal
    idx = np.add.outer(np.arange(window), np.arange(n - window + 1))
    np.testing.assert_array_equal(kappa, np.bincount(idx.ravel(), minlength=n))


def test_project_hankel_means():
    np.testing.assert_allclose(project_hankel([[1.0, 3.0], [5.0, 7.0]]), [1, 4, 7])


@given(series, st.data())
def test_round_trip(p, data):
    window = data.draw(st.integers(1, p.size))
    np.testing.assert_array_equal(project_hankel(embed(p, window)), p)


def test_projection_is_least_squares():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 4))
    best = np.linalg.norm(embed(project_hankel(a), 3) - a)
    for _ in range(10_000):
        assert best <= np.linalg.norm(embed(rng.standard_normal(6), 3) - a) + 1e-12


@settings(max_examples=50)
@given(st.integers(2, 20), st.data())
def test_weighted_frobenius_identity(n, data):
    window = data.draw(st.integers(1, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    p, p0 = rng.standard_normal((2, n))
    lhs = np.linalg.norm(embed(p, window) - embed(p0, window)) ** 2
    rhs = np.sum(antidiag_weights(n, window) * (p - p0) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_weighted_projection_identity_weights():
    a = np.random.default_rng(1).standard_normal((4, 6))
    np.testing.assert_allclose(project_hankel_weighted(a, QrWeights.identity(4, 6)), project_hankel(a),
                               atol=1e-12)


def test_weighted_projection_example():
    p = project_hankel_weighted(np.array([[1.0, 3.0], [5.0, 7.0]]), QrWeights.diagonal([2.0, 1.0], [1.0, 1.0]))
    np.testing.assert_allclose(p, [1.0, 11.0 / 3.0, 7.0], atol=1e-12)


def test_weighted_projection_stationary():
    rng = np.random.default_rng(2)
    w = QrWeights(random_spd(rng, 3), random_spd(rng, 5))
    a = rng.standard_normal((3, 5))
    p = project_hankel_weighted(a, w)

    def f(x):
        return qr_norm(embed(x, 3) - a, w) ** 2

    h = 1e-6
    grad = np.array([(f(p + h * e) - f(p - h * e)) / (2 * h) for e in np.eye(p.size)])
    assert np.max(np.abs(grad)) < 1e-7 * max(1.0, f(p))


def test_rank_profile_undamped_sinusoid():
    p = np.sin(2 * np.pi * 0.13 * np.arange(1, 12) + 0.4)
    prof = rank_profile(p)
    np.testing.assert_array_equal(prof, [min(L, 12 - L, 2) for L in range(1, 12)])


def test_rank_profile_white_noise():
    p = np.random.default_rng(3).standard_normal(15)
    np.testing.assert_array_equal(rank_profile(p), [min(L, 16 - L) for L in range(1, 16)])


def test_rank_profile_constant():
    np.testing.assert_array_equal(rank_profile(np.full(9, -2.5)), np.ones(9))


@pytest.mark.parametrize("tol", [0.0, 1.0])
def test_rank_profile_tol_bounds(tol):
    with pytest.raises(ArgumentError):
        rank_profile(np.arange(5.0), tol)


@pytest.mark.parametrize("p, d, expected", [
    (2.0 ** np.arange(8), 1, [2, -1]),
    ([1, 1, 2, 3, 5, 8, 13], 2, [1, 1, -1]),
    (np.full(6, 3.0), 1, [1, -1]),
])
def test_minimal_lrr_examples(p, d, expected):
    q = minimal_lrr(p, d)
    e = np.asarray(expected, dtype=float)
    np.testing.assert_allclose(q.theta, e / np.linalg.norm(e), atol=1e-10)


def test_minimal_lrr_rank_mismatch():
    with pytest.raises(RankMismatchError) as info:
        minimal_lrr(np.random.default_rng(4).standard_normal(12), 2)
    assert info.value.singular_values.size == 3


def test_lrr_normalisation():
    q = LrrCoefficients([0.0, -3.0, 4.0])
    np.testing.assert_allclose(q.theta, [0, 0.6, -0.8])
    with pytest.raises(ArgumentError):
        LrrCoefficients([0.0, 0.0])


def test_multiplication_matrix_pattern():
    np.testing.assert_array_equal(multiplication_matrix([2.0, 3.0], 1), [[2, 0], [3, 2], [0, 3]])
    np.testing.assert_array_equal(multiplication_matrix([2.0, 3.0], 0), [[2], [3]])


def test_multiplication_matrix_annihilates_fibonacci():
    p = np.array([1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144], dtype=float)
    q = minimal_lrr(p, 2)
    m = multiplication_matrix(q, 2)
    assert np.max(np.abs(m.T @ embed(p, 5))) < 1e-10 * np.abs(p).max()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_plateau_and_kernel_span(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    head = int(rng.integers(0, min(1, d) + 1))
    n = int(rng.integers(2 * d + 1, 26))
    _, p = random_finite_rank(rng, d, n, head=head)
    np.testing.assert_array_equal(rank_profile(p), [min(L, n - L + 1, d) for L in range(1, n + 1)])
    q = minimal_lrr(p, d)
    for r in range(d, n - d + 1):
        h = embed(p, r + 1)
        m = multiplication_matrix(q, r - d)
        assert np.max(np.abs(m.T @ h)) < 1e-9 * np.abs(h).max()
        kernel = null_space(h.T, rcond=1e-9)
        assert kernel.shape[1] == r - d + 1
        # the banded columns span exactly the computed kernel
        assert np.linalg.matrix_rank(np.hstack([kernel, m]), tol=1e-8) == r - d + 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_window_rank_equivalence(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    n = int(rng.integers(2 * d + 3, 24))
    _, p = random_finite_rank(rng, d, n)
    for r in range(1, (n + 1) // 2):
        small = rank_profile(p)[r] <= r  # window r + 1
        for L in range(r + 1, n - r + 1):
            assert (rank_profile(p)[L - 1] <= r) == small
