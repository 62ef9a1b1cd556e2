"""Matrix factorizations for the space-division relay scheme.

The central object is the joint two-channel decomposition
``H_m = U @ D_m @ G_m`` (m in {A, B}) that splits the relay's receive
space into a common subspace shared by both users, obliquely paired
direction pairs, and per-user orthogonal remainders.  The pairing is
built constructively from the eigenvectors of the sum of the two column-
space projectors, which keeps it deterministic: no eigenvector sign or
ordering ambiguity from the eigensolver can leak into the factors.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ClassificationAmbiguous,
    DimensionMismatch,
    IndexOutOfRange,
    RankDeficient,
    Singular,
)

__all__ = [
    "JointDecomposition",
    "GsvdFactors",
    "compact_svd",
    "joint_decompose",
    "degree_of_orthogonality",
    "rq_decompose",
    "gsvd",
]

_RANK_RTOL = 1e-12
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class JointDecomposition:
    """Joint factorization H_A = U D_A G_A, H_B = U D_B G_B.

    ``U`` has orthonormal columns spanning the union of the two column
    spaces; ``D_m`` are real matrices with orthonormal columns encoding
    the subspace geometry; ``G_m`` are square and generically invertible.
    ``k`` counts fully shared directions, ``l`` oblique pairs, ``d_A`` /
    ``d_B`` the per-user orthogonal remainders; ``lambdas`` holds the
    k + l pair eigenvalues in descending order (the first k equal 2).
    """

    U: np.ndarray
    D_A: np.ndarray
    D_B: np.ndarray
    G_A: np.ndarray
    G_B: np.ndarray
    k: int
    l: int
    d_A: int
    d_B: int
    lambdas: np.ndarray

    @property
    def n_A(self) -> int:
        return self.k + self.l + self.d_A

    @property
    def n_B(self) -> int:
        return self.k + self.l + self.d_B


@dataclass(frozen=True)
class GsvdFactors:
    """Generalized SVD of a square nonsingular pair, plus a QR refinement.

    H_A = B @ Sigma_A @ T_A', H_B = B @ Sigma_B @ T_B' with B square
    nonsingular, Sigma_m nonnegative diagonal satisfying
    Sigma_A^2 + Sigma_B^2 = I, and B = Q @ Rtilde upper-triangular with
    nonnegative real diagonal.
    """

    B: np.ndarray
    Sigma_A: np.ndarray
    Sigma_B: np.ndarray
    T_A: np.ndarray
    T_B: np.ndarray
    Q: np.ndarray
    Rtilde: np.ndarray

    @property
    def sigma_A(self) -> np.ndarray:
        """Diagonal of Sigma_A as a 1-D array."""
        return np.diagonal(self.Sigma_A).copy()

    @property
    def sigma_B(self) -> np.ndarray:
        return np.diagonal(self.Sigma_B).copy()

    @property
    def r_diag(self) -> np.ndarray:
        """Diagonal of Rtilde (real nonnegative by convention)."""
        return np.diagonal(self.Rtilde).real.copy()


def _as_matrix(H, name):
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {H.shape}")
    if not np.all(np.isfinite(H.real)) or not np.all(np.isfinite(H.imag)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return H


def compact_svd(H):
    """Economy SVD H = U diag(delta) V' with positive descending delta.

    Returns (U, delta, V).  Raises RankDeficient when the smallest
    singular value falls below 1e-12 times the largest, which Monte Carlo
    callers treat as a resampling signal.
    """
    H = _as_matrix(H, "H")
    if H.shape[1] > H.shape[0] or H.shape[1] == 0:
        raise RankDeficient(
            f"shape {H.shape} cannot have full column rank"
        )
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= _RANK_RTOL * s[0]:
        raise RankDeficient(
            f"column rank deficient: singular values {s[-1]:.3e} vs {s[0]:.3e}"
        )
    return U, s, Vh.conj().T


def joint_decompose(H_AR, H_BR, tol: float = 1e-8) -> JointDecomposition:
    """Jointly factor two full-column-rank channels sharing a row space.

    Eigenvalues of the projector sum M = P_A + P_B classify each relay
    direction: 2 means a shared direction, a value in (1, 2) an oblique
    pair (its mirror 2 - lambda carries no extra information), and 1 a
    direction inside exactly one column space.  ``tol`` is the absolute
    classification margin around those boundaries; the default suits
    continuous random draws, synthetic constructions sitting on a
    boundary may need it loosened.
    """
    H_AR = _as_matrix(H_AR, "H_AR")
    H_BR = _as_matrix(H_BR, "H_BR")
    if H_AR.shape[0] != H_BR.shape[0]:
        raise DimensionMismatch(
            f"row counts differ: {H_AR.shape[0]} vs {H_BR.shape[0]}"
        )
    if tol <= 0:
        raise ValueError("tol must be positive")
    n_R = H_AR.shape[0]
    n_A, n_B = H_AR.shape[1], H_BR.shape[1]
    U_A = compact_svd(H_AR)[0]
    U_B = compact_svd(H_BR)[0]
    P_A = U_A @ U_A.conj().T
    P_B = U_B @ U_B.conj().T
    M = P_A + P_B
    w, V = np.linalg.eigh(M)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]

    a_idx = [i for i in range(n_R) if w[i] >= 2 - tol]
    b_idx = [i for i in range(n_R) if 1 + tol < w[i] < 2 - tol]
    c_idx = [i for i in range(n_R) if abs(w[i] - 1) <= tol]
    k, l = len(a_idx), len(b_idx)

    cols = [V[:, i] for i in a_idx]
    lam_pairs = []
    for i in b_idx:
        u = V[:, i]
        lam = float(w[i])
        l_a = P_A @ u
        l_b = P_B @ u
        # the difference of the two projections is the mirror eigenvector
        cols.append(u)
        cols.append((l_a - l_b) / np.sqrt(lam * (2 - lam)))
        lam_pairs.append(lam)

    # lambda = 1 space: P_A restricted to it is idempotent, so its
    # eigenvalues split the space cleanly into user-A and user-B parts
    # even when the eigensolver returned a rotated basis.
    ca_vecs, cb_vecs = [], []
    if c_idx:
        W = V[:, c_idx]
        S = W.conj().T @ P_A @ W
        _, sv = np.linalg.eigh(0.5 * (S + S.conj().T))
        Wr = W @ sv
        for j in range(Wr.shape[1]):
            u = Wr[:, j]
            res_a = np.linalg.norm(P_A @ u - u)
            res_b = np.linalg.norm(P_B @ u - u)
            if res_a <= tol and res_a <= res_b:
                ca_vecs.append(u)
            elif res_b <= tol:
                cb_vecs.append(u)
            else:
                raise ClassificationAmbiguous(
                    f"eigenvalue {w[c_idx[j]]:.12f} near 1 but projection "
                    f"residuals are {res_a:.2e} / {res_b:.2e}; tol too coarse"
                )
    d_A, d_B = len(ca_vecs), len(cb_vecs)
    if k + l + d_A != n_A or k + l + d_B != n_B:
        raise ClassificationAmbiguous(
            f"inconsistent subspace counts (k={k}, l={l}, d_A={d_A}, "
            f"d_B={d_B}) for shapes n_A={n_A}, n_B={n_B}; adjust tol"
        )

    U = np.column_stack(cols + ca_vecs + cb_vecs) if (cols or ca_vecs or cb_vecs) \
        else np.zeros((n_R, 0), dtype=np.complex128)
    lambdas = np.array([2.0] * k + lam_pairs)

    D_A = _build_d(k, l, d_A, d_B, lam_pairs, "A")
    D_B = _build_d(k, l, d_A, d_B, lam_pairs, "B")
    G_A = (U @ D_A).conj().T @ H_AR
    G_B = (U @ D_B).conj().T @ H_BR
    return JointDecomposition(
        U=U, D_A=D_A, D_B=D_B, G_A=G_A, G_B=G_B,
        k=k, l=l, d_A=d_A, d_B=d_B, lambdas=lambdas,
    )


def _build_d(k, l, d_A, d_B, lam_pairs, which):
    """Block matrix of unit columns: identity, paired 2-vectors, identity."""
    d_m = d_A if which == "A" else d_B
    D = np.zeros((k + 2 * l + d_A + d_B, k + l + d_m))
    D[:k, :k] = np.eye(k)
    for i, lam in enumerate(lam_pairs):
        second = np.sqrt((2 - lam) / 2)
        D[k + 2 * i, k + i] = np.sqrt(lam / 2)
        D[k + 2 * i + 1, k + i] = second if which == "A" else -second
    if which == "A":
        D[k + 2 * l : k + 2 * l + d_A, k + l :] = np.eye(d_A)
    else:
        D[k + 2 * l + d_A :, k + l :] = np.eye(d_B)
    return D


def degree_of_orthogonality(jd: JointDecomposition, i: int) -> float:
    """Inner product of the i-th direction pair (1-indexed), lambda_i - 1.

    Equals 1 on the shared subspace (i <= k) and decays to 0 as the pair
    approaches orthogonality.
    """
    if not 1 <= i <= jd.k + jd.l:
        raise IndexOutOfRange(f"pair index {i} outside [1, {jd.k + jd.l}]")
    v_a = jd.U @ jd.D_A[:, i - 1]
    v_b = jd.U @ jd.D_B[:, i - 1]
    return float(np.vdot(v_a, v_b).real)


def rq_decompose(G):
    """RQ factorization G = R T' with upper-triangular R, unitary T.

    The diagonal of R is made real nonnegative, which pins the otherwise
    free per-row phases and makes the factorization unique for
    nonsingular inputs.
    """
    G = _as_matrix(G, "G")
    if G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"G must be square, got {G.shape}")
    if G.shape[0] == 0:
        return G.copy(), G.copy()
    R, Q = sla.rq(G)
    d = np.diagonal(R)
    phase = np.where(np.abs(d) > 0, d / np.abs(np.where(d == 0, 1, d)), 1.0)
    R = R * phase.conj()[None, :]
    Q = phase[:, None] * Q
    return R, Q.conj().T


def _positive_diag_qr(X):
    """QR with real nonnegative diagonal of R."""
    Q, R = np.linalg.qr(X)
    d = np.diagonal(R)
    phase = np.where(np.abs(d) > 0, d / np.abs(np.where(d == 0, 1, d)), 1.0)
    return Q * phase.conj()[None, :], phase.conj()[:, None] * R


def gsvd(HA, HB) -> GsvdFactors:
    """Generalized SVD of a square nonsingular pair via the CS route.

    A QR factorization of the stacked adjoints [HA'; HB'] yields two
    orthonormal blocks sharing a right factor; the cosine-sine split of
    those blocks (SVD of the first, triangularization of the second on
    the shared basis, which lands diagonal) produces
    H_m = B Sigma_m T_m' with a common left factor B, refined as
    B = Q Rtilde.  sigma_A is descending, sigma_B ascending, and
    Sigma_A^2 + Sigma_B^2 = I.
    """
    HA = _as_matrix(HA, "HA")
    HB = _as_matrix(HB, "HB")
    if HA.shape != HB.shape or HA.shape[0] != HA.shape[1]:
        raise DimensionMismatch(
            f"inputs must be square and same shape, got {HA.shape}, {HB.shape}"
        )
    n = HA.shape[0]
    for name, H in (("HA", HA), ("HB", HB)):
        s = np.linalg.svd(H, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > _COND_LIMIT:
            raise Singular(f"{name} condition number exceeds {_COND_LIMIT:.0e}")
    Qs, Rs = _positive_diag_qr(np.vstack([HA.conj().T, HB.conj().T]))
    Q1, Q2 = Qs[:n], Qs[n:]
    W_A, c, Zh = np.linalg.svd(Q1)
    Z = Zh.conj().T
    c = np.clip(c, 0.0, 1.0)
    s = np.sqrt(np.clip(1.0 - c**2, 0.0, None))
    # on the basis Z, the second block is W_B diag(s): a QR extracts W_B
    W_B, Sr = _positive_diag_qr(Q2 @ Z)
    off = np.linalg.norm(Sr - np.diag(np.diagonal(Sr).real))
    if off > 1e-8 * max(1.0, np.linalg.norm(Sr)):
        raise Singular("cosine-sine split failed to diagonalize the pair")
    B = Rs.conj().T @ Z
    Qb, Rt = _positive_diag_qr(B)
    return GsvdFactors(
        B=B, Sigma_A=np.diag(c), Sigma_B=np.diag(s),
        T_A=W_A, T_B=W_B, Q=Qb, Rtilde=Rt,
    )
