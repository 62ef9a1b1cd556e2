"""Joint decomposition, RQ, and GSVD invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twrc.errors import DimensionMismatch, IndexOutOfRange, RankDeficient
from twrc.linalg import (
    compact_svd,
    degree_of_orthogonality,
    gsvd,
    joint_decompose,
    rq_decompose,
)

from conftest import cplx


def assert_valid(jd, H_A, H_B):
    n_A, n_B = H_A.shape[1], H_B.shape[1]
    assert jd.k + jd.l + jd.d_A == n_A
    assert jd.k + jd.l + jd.d_B == n_B
    n_cols = jd.k + 2 * jd.l + jd.d_A + jd.d_B
    assert jd.U.shape == (H_A.shape[0], n_cols)
    assert np.abs(jd.U.conj().T @ jd.U - np.eye(n_cols)).max() < 1e-10
    assert np.abs(jd.U @ jd.D_A @ jd.G_A - H_A).max() < 1e-10
    assert np.abs(jd.U @ jd.D_B @ jd.G_B - H_B).max() < 1e-10
    assert len(jd.lambdas) == jd.k + jd.l
    lam = np.asarray(jd.lambdas)
    assert np.all(np.diff(lam) <= 1e-12)
    assert np.all(lam[: jd.k] > 2.0 - 1e-8)
    pair = lam[jd.k :]
    assert np.all((pair > 1.0 + 1e-10) & (pair < 2.0 - 1e-10))


@pytest.mark.parametrize(
    "n_A,n_B,n_R",
    [(1, 1, 2), (2, 2, 4), (2, 3, 5), (2, 2, 3), (3, 3, 4), (1, 2, 3), (3, 2, 8)],
)
def test_random_draws_satisfy_invariants(rng, n_A, n_B, n_R):
    for _ in range(5):
        H_A, H_B = cplx(rng, n_R, n_A), cplx(rng, n_R, n_B)
        assert_valid(joint_decompose(H_A, H_B), H_A, H_B)


def test_generic_block_counts(rng):
    # generic subspaces: overlap only when dimensions force it
    for (n_A, n_B, n_R), (k, l) in {
        (2, 2, 4): (0, 2),
        (2, 2, 3): (1, 1),
        (4, 4, 8): (0, 4),
        (6, 6, 9): (3, 3),
    }.items():
        jd = joint_decompose(cplx(rng, n_R, n_A), cplx(rng, n_R, n_B))
        assert (jd.k, jd.l) == (k, l)
        assert jd.d_A == jd.d_B == 0


def test_identical_column_spaces_are_fully_shared(rng):
    H_A = cplx(rng, 5, 2)
    C = cplx(rng, 2, 2) + 2 * np.eye(2)
    jd = joint_decompose(H_A, H_A @ C)
    assert (jd.k, jd.l, jd.d_A, jd.d_B) == (2, 0, 0, 0)
    assert np.allclose(jd.lambdas, 2.0, atol=1e-9)


def test_orthogonal_column_spaces_are_exclusive(rng):
    U = np.linalg.qr(cplx(rng, 6, 4))[0]
    jd = joint_decompose(U[:, :2], U[:, 2:])
    assert (jd.k, jd.l, jd.d_A, jd.d_B) == (0, 0, 2, 2)
    assert len(jd.lambdas) == 0


def test_degree_of_orthogonality_matches_lambda(rng):
    H_A, H_B = cplx(rng, 6, 3), cplx(rng, 6, 2)
    jd = joint_decompose(H_A, H_B)
    for i in range(1, jd.k + jd.l + 1):
        assert degree_of_orthogonality(jd, i) == pytest.approx(
            jd.lambdas[i - 1] - 1.0, abs=1e-10
        )
    for bad in (0, jd.k + jd.l + 1, -1):
        with pytest.raises(IndexOutOfRange):
            degree_of_orthogonality(jd, bad)


def test_rank_deficient_inputs_rejected(rng):
    with pytest.raises(RankDeficient):
        joint_decompose(cplx(rng, 2, 3), cplx(rng, 2, 1))
    H = cplx(rng, 4, 2)
    H[:, 1] = H[:, 0]
    with pytest.raises(RankDeficient):
        joint_decompose(H, cplx(rng, 4, 1))


def test_compact_svd_reconstructs(rng):
    H = cplx(rng, 5, 3)
    U, s, V = compact_svd(H)
    assert U.shape == (5, 3) and s.shape == (3,)
    assert np.abs(U @ np.diag(s) @ V.conj().T - H).max() < 1e-12
    assert np.all(np.diff(s) <= 0)
    with pytest.raises(RankDeficient):
        compact_svd(cplx(rng, 2, 4))


def test_rq_factor_shapes_and_triangularity(rng):
    G = cplx(rng, 4, 4)
    R, T = rq_decompose(G)
    assert np.abs(R @ T.conj().T - G).max() < 1e-12
    assert np.abs(np.tril(R, -1)).max() == 0.0
    d = np.diag(R)
    assert np.all(d.real > 0) and np.abs(d.imag).max() < 1e-14
    assert np.abs(T.conj().T @ T - np.eye(4)).max() < 1e-12
    with pytest.raises(DimensionMismatch):
        rq_decompose(cplx(rng, 3, 4))


def test_gsvd_joint_factorization(rng):
    A, B = cplx(rng, 3, 3), cplx(rng, 3, 3)
    fac = gsvd(A, B)
    assert np.abs(fac.B @ fac.Sigma_A @ fac.T_A.conj().T - A).max() < 1e-10
    assert np.abs(fac.B @ fac.Sigma_B @ fac.T_B.conj().T - B).max() < 1e-10
    sa = np.diag(fac.Sigma_A).real
    sb = np.diag(fac.Sigma_B).real
    assert np.abs(sa**2 + sb**2 - 1.0).max() < 1e-10
    assert np.all(np.diff(sa) <= 1e-12)
    for T in (fac.T_A, fac.T_B):
        assert np.abs(T.conj().T @ T - np.eye(3)).max() < 1e-10


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n_A=st.integers(1, 3),
    n_B=st.integers(1, 3),
    extra=st.integers(0, 4),
)
def test_decomposition_invariants_property(seed, n_A, n_B, extra):
    rng = np.random.default_rng(seed)
    n_R = max(n_A, n_B) + extra
    H_A, H_B = cplx(rng, n_R, n_A), cplx(rng, n_R, n_B)
    assert_valid(joint_decompose(H_A, H_B), H_A, H_B)
