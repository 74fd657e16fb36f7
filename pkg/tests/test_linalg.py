import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharecap.linalg import (
    TOL,
    Tolerances,
    as_hermitian,
    eigh,
    is_psd,
    null_basis,
    nullspace_contained,
    pinv,
    positive_part,
    range_factor,
    rank1_positive_part_shifted,
    rank_eps,
    sqrt_psd,
)


def random_psd(seed: int, m: int, r: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((r, m)) + 1j * rng.standard_normal((r, m))
    return H.conj().T @ H


def test_eigh_descending_and_reconstructs():
    A = np.array([[2.0, 1j], [-1j, 2.0]])
    w, U = eigh(A)
    assert np.allclose(w, [3.0, 1.0], atol=1e-14)
    assert np.allclose((U * w) @ U.conj().T, A, atol=1e-14)


def test_as_hermitian_rejects_non_square():
    with pytest.raises(ValueError):
        as_hermitian(np.zeros((2, 3)))


def test_positive_part_fixture():
    # eigenvalues 3 and -1 along (1, 1)/sqrt2 and (1, -1)/sqrt2
    A = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert np.allclose(positive_part(A), 1.5 * np.ones((2, 2)), atol=1e-14)


def test_pinv_of_rank_one():
    u = np.array([3.0, 4.0]) / 5.0
    A = 4.0 * np.outer(u, u)
    assert np.allclose(pinv(A), 0.25 * np.outer(u, u), atol=1e-14)


def test_rank1_positive_part_shifted():
    u = np.array([1.0, 1.0]) / np.sqrt(2.0)
    out = rank1_positive_part_shifted(4.0, u)
    assert np.allclose(out, 0.75 * np.outer(u, u))
    assert np.allclose(rank1_positive_part_shifted(0.5, u), 0.0)
    with pytest.raises(ValueError):
        rank1_positive_part_shifted(0.0, u)
    with pytest.raises(ValueError):
        rank1_positive_part_shifted(2.0, 2 * u)


def test_sqrt_psd():
    A = np.diag([4.0, 9.0])
    assert np.allclose(sqrt_psd(A), np.diag([2.0, 3.0]))
    with pytest.raises(ValueError):
        sqrt_psd(np.diag([1.0, -1.0]))


def test_rank_null_range():
    A = random_psd(0, 5, 2)
    assert rank_eps(A) == 2
    N = null_basis(A)
    assert N.shape == (5, 3)
    assert np.max(np.abs(A @ N)) < 1e-10 * np.max(np.abs(A))
    F = range_factor(A)
    assert F.shape == (5, 2)
    assert np.allclose(F @ F.conj().T, A, atol=1e-10)


def test_rank_of_zero_matrix():
    Z = np.zeros((3, 3))
    assert rank_eps(Z) == 0
    assert null_basis(Z).shape == (3, 3)
    assert range_factor(Z).shape == (3, 0)


def test_nullspace_containment():
    e1 = np.diag([1.0, 0.0])
    assert nullspace_contained(np.eye(2), e1)
    assert nullspace_contained(e1, e1)
    assert not nullspace_contained(e1, np.eye(2))
    with pytest.raises(ValueError):
        nullspace_contained(np.eye(2), np.eye(3))


def test_tolerances_scale_with_dimension():
    assert Tolerances(recon=1e-9).recon_for(8) == pytest.approx(8e-9)
    assert TOL.rank == 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 6), data=st.data())
def test_psd_helpers_are_consistent(seed, m, data):
    r = data.draw(st.integers(1, m))
    A = random_psd(seed, m, r)
    assert is_psd(A)
    assert rank_eps(A) == r
    P = positive_part(A - 0.5 * np.trace(A).real / m * np.eye(m))
    assert is_psd(P)
    assert np.allclose(positive_part(P), P, atol=1e-10 * max(1.0, np.abs(P).max()))
    S = sqrt_psd(A)
    assert np.allclose(S @ S, A, atol=1e-8 * max(1.0, np.abs(A).max()))
    Ap = pinv(A)
    assert np.allclose(A @ Ap @ A, A, atol=1e-7 * max(1.0, np.abs(A).max()))
