import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rt_dlra.tensor_core import qr_factor, svd, tail_norms, truncation_rank

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def tall(draw_rows=(1, 12), draw_cols=(1, 6)):
    @st.composite
    def build(draw):
        n = draw(st.integers(*draw_cols))
        m = draw(st.integers(max(n, draw_rows[0]), max(n, draw_rows[1])))
        return draw(arrays(float, (m, n), elements=finite))
    return build()


def test_qr_identity():
    Q, R = qr_factor(np.eye(3))
    np.testing.assert_array_equal(Q, np.eye(3))
    np.testing.assert_array_equal(R, np.eye(3))


def test_qr_zero_column_keeps_orthonormal_q():
    M = np.array([[1.0, 0.0, 2.0], [3.0, 0.0, -1.0], [0.5, 0.0, 4.0], [2.0, 0.0, 0.0]])
    Q, R = qr_factor(M)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(Q @ R, M, atol=1e-12)
    assert np.all(np.abs(R[1:, 1]) < 1e-12) or abs(R[1, 1]) < 1e-12


def test_qr_random(rng):
    M = rng.standard_normal((6, 3))
    Q, R = qr_factor(M)
    assert np.linalg.norm(Q @ R - M) / np.linalg.norm(M) <= 1e-12
    assert np.all(np.diag(R) >= 0)
    np.testing.assert_array_equal(R, np.triu(R))


def test_qr_rejects_wide():
    with pytest.raises(ValueError):
        qr_factor(np.ones((2, 3)))


@given(tall())
def test_qr_properties(M):
    Q, R = qr_factor(M)
    scale = max(np.linalg.norm(M), 1.0)
    assert np.linalg.norm(Q @ R - M) <= 1e-12 * scale
    assert np.abs(Q.T @ Q - np.eye(M.shape[1])).max() <= 1e-12


def test_svd_diagonal():
    res = svd(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(res.singular_values, [3.0, 1.0])
    np.testing.assert_array_equal(np.abs(res.left), np.eye(2))
    np.testing.assert_array_equal(np.abs(res.right), np.eye(2))


def test_svd_rank_one(rng):
    a, b = rng.standard_normal(7), rng.standard_normal(5)
    s = svd(np.outer(a, b)).singular_values
    assert np.sum(s > 1e-12 * s[0]) == 1
    assert s[0] == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b), rel=1e-13)


def test_svd_zero_matrix():
    res = svd(np.zeros((4, 3)))
    np.testing.assert_array_equal(res.singular_values, 0.0)


def test_svd_empty_rejected():
    with pytest.raises(ValueError):
        svd(np.zeros((0, 3)))


def test_svd_sign_convention(rng):
    res = svd(rng.standard_normal((9, 4)))
    idx = np.argmax(np.abs(res.left), axis=0)
    assert np.all(res.left[idx, np.arange(4)] > 0)


def test_svd_matches_gram_eigenvalues(rng):
    for _ in range(10):
        M = rng.standard_normal((8, 8))
        s = svd(M).singular_values
        lam = np.sort(np.linalg.eigvalsh(M.T @ M))[::-1]
        np.testing.assert_allclose(s, np.sqrt(np.clip(lam, 0, None)), atol=1e-10)


@given(tall((1, 10), (1, 10)))
def test_svd_properties(M):
    res = svd(M)
    scale = max(np.linalg.norm(M), 1.0)
    assert np.linalg.norm(res.reconstruct() - M) <= 1e-12 * scale
    assert np.all(np.diff(res.singular_values) <= 0)
    assert np.all(res.singular_values >= 0)


@pytest.mark.parametrize("s, tol, floor, expected", [
    ((1.0, 1e-3), 1e-2, 0, 1),
    ((1.0, 1e-3), 0.0, 0, 2),
    ((5.0, 4.0, 3.0), 100.0, 2, 2),
    ((5.0, 4.0, 3.0), 100.0, 0, 0),
    ((1.0, 0.0, 0.0), 0.0, 0, 1),
    ((3.0, 2.0), 0.0, 2, 2),
])
def test_truncation_rank_examples(s, tol, floor, expected):
    assert truncation_rank(s, tol, floor) == expected


@pytest.mark.parametrize("s, tol, floor", [
    ((1.0, 2.0), 0.1, 0),
    ((2.0, 1.0), -1.0, 0),
    ((2.0, 1.0), float("nan"), 0),
    ((2.0, 1.0), 0.1, 3),
])
def test_truncation_rank_errors(s, tol, floor):
    with pytest.raises(ValueError):
        truncation_rank(s, tol, floor)


def test_tail_norms():
    np.testing.assert_allclose(tail_norms([3.0, 4.0]), [5.0, 4.0, 0.0])


sorted_sv = st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12).map(
    lambda v: sorted(v, reverse=True))


@given(sorted_sv, st.floats(0, 20), st.floats(0, 20), st.data())
def test_truncation_rank_monotone(s, t1, t2, data):
    lo, hi = sorted((t1, t2))
    f1 = data.draw(st.integers(0, len(s)))
    f2 = data.draw(st.integers(f1, len(s)))
    assert truncation_rank(s, hi, f1) <= truncation_rank(s, lo, f1)
    assert truncation_rank(s, lo, f1) <= truncation_rank(s, lo, f2)


@given(sorted_sv, st.floats(0, 20))
def test_truncation_rank_minimal(s, tol):
    r = truncation_rank(s, tol)
    tails = tail_norms(s)
    assert tails[r] <= tol
    if r > 0:
        assert tails[r - 1] > tol
