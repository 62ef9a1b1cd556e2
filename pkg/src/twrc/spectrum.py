"""High-SNR and large-system behavior of the space-division scheme.

Two regimes are covered.  At high SNR with a fixed channel, the scheme's
sum-rate loss against the cut-set bound converges to a gap determined
solely by the pair eigenvalues, with a closed-form split rule (keep a
pair on network coding iff its eigenvalue is at least 8/5).  In the
large-antenna limit with Rayleigh fading, the eigenvalues follow an
explicit limit distribution, and averaging the gap against it gives a
per-relay-antenna loss figure.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.integrate

from .errors import DomainError, IndexOutOfRange, QuadratureFailure
from .linalg import JointDecomposition
from .rates import (
    TwrcInstance,
    mac_pentagon,
    pnc_rate_mimo,
    sd_effective_channels,
)
from .linalg import gsvd

__all__ = [
    "AedSpec",
    "asymptotic_gap",
    "optimal_l_prime",
    "high_snr_gap_empirical",
    "aed",
    "support_edge",
    "normalized_gap",
    "symmetric_normalized_gap",
    "approx_average_sum_rate",
    "planted_channel_pair",
    "SPLIT_THRESHOLD",
]

# pair eigenvalue at which the two per-pair losses coincide:
# 2 - lam = lam/4  =>  lam = 8/5
SPLIT_THRESHOLD = 1.6

_LOG2 = math.log(2.0)


def _check_lambdas(lambdas, k):
    lam = np.asarray(lambdas, dtype=float).ravel()
    if k < 0 or k > lam.shape[0]:
        raise IndexOutOfRange(f"k = {k} outside [0, {lam.shape[0]}]")
    pairs = lam[k:]
    if np.any(pairs <= 1.0) or np.any(pairs >= 2.0):
        raise DomainError("pair eigenvalues must lie strictly inside (1, 2)")
    if np.any(np.diff(lam) > 1e-12):
        raise DomainError("eigenvalue list must be descending")
    return lam


def asymptotic_gap(lambdas, k: int, l_prime: int) -> float:
    """High-SNR sum-rate gap of a fixed split, in bits.

    Pairs routed to network coding lose log2(2/lam) each (projection
    keeps lam/2 of the pair energy); pairs routed to complete decoding
    lose half the log of the squared sine of their principal angle.
    Common directions and orthogonal remainders cost nothing.
    """
    lam = _check_lambdas(lambdas, k)
    l = lam.shape[0] - k
    if not 0 <= l_prime <= l:
        raise IndexOutOfRange(f"l_prime = {l_prime} outside [0, {l}]")
    pnc = lam[k : k + l_prime]
    cd = lam[k + l_prime :]
    gap = -np.sum(np.log2(pnc / 2.0)) - 0.5 * np.sum(np.log2(cd * (2.0 - cd)))
    return float(max(gap, 0.0))


def optimal_l_prime(lambdas, k: int) -> int:
    """Gap-minimizing pair count: pairs with eigenvalue >= 8/5.

    At exactly 8/5 the two losses tie, so the tie goes to network
    coding; either choice yields the same gap.
    """
    lam = _check_lambdas(lambdas, k)
    return int(np.sum(lam[k:] >= SPLIT_THRESHOLD))


def high_snr_gap_empirical(ch: TwrcInstance, jd: JointDecomposition,
                           l_prime: int, snr_db: float) -> float:
    """Finite-SNR sum-rate gap under uniform power spreading.

    Every transmit dimension of user m (decoded streams and projected
    streams alike) carries P/n_m with P = N0 * 10^(snr/10); the result
    converges to ``asymptotic_gap`` as the SNR grows.
    """
    n0 = ch.power.N0
    P = n0 * 10.0 ** (snr_db / 10.0)
    n_A, n_B = ch.n_A, ch.n_B
    ub = 0.0
    for H, n in ((ch.H_AR, n_A), (ch.H_BR, n_B)):
        K = np.eye(ch.n_R, dtype=np.complex128) + (P / (n * n0)) * (H @ H.conj().T)
        ub += 0.5 * np.linalg.slogdet(K)[1] / _LOG2
    blocks = sd_effective_channels(jd, l_prime)
    kl = jd.k + l_prime
    sd = 0.0
    na, nb = blocks.H_cd_A.shape[1], blocks.H_cd_B.shape[1]
    if na or nb:
        QA = (P / n_A) * np.eye(na, dtype=np.complex128)
        QB = (P / n_B) * np.eye(nb, dtype=np.complex128)
        sd += mac_pentagon(blocks.H_cd_A, blocks.H_cd_B, QA, QB, n0).S_AB
    if kl:
        fac = gsvd(blocks.Ht_A, blocks.Ht_B)
        pair = pnc_rate_mimo(
            fac, np.full(kl, P / n_A), np.full(kl, P / n_B), n0
        )
        sd += pair.sum_rate
    return float(ub - sd)


def _support_intervals(a: float, b: float):
    """Support of the continuous spectrum, as disjoint lambda intervals.

    With u = lam - 1 the density is positive iff
    u^4 - u^2 (1 + d^2 - base) + d^2 < 0, a quadratic in u^2, so the
    support is an annulus in u: one interval around lam = 1 when the
    loads are equal, two mirror intervals otherwise.
    """
    base = (1.0 - a - b) ** 2
    d2 = (a - b) ** 2
    p = 1.0 + d2 - base
    disc = p * p - 4.0 * d2
    if disc <= 0:
        return []
    r1 = (p - math.sqrt(disc)) / 2.0
    r2 = (p + math.sqrt(disc)) / 2.0
    u_in = math.sqrt(max(r1, 0.0))
    u_out = math.sqrt(min(max(r2, 0.0), 1.0))
    if u_out <= u_in:
        return []
    if u_in < 1e-12:
        return [(1.0 - u_out, 1.0 + u_out)]
    return [(1.0 - u_out, 1.0 - u_in), (1.0 + u_in, 1.0 + u_out)]


def _quad_lambda(f, lam_lo: float, lam_hi: float, quad_tol: float) -> float:
    """Integrate f over an eigenvalue interval inside [0, 2].

    The substitution lam = 1 - cos(t) absorbs the inverse-square-root
    edge behavior of the spectral densities, so adaptive quadrature
    converges; the error estimate is checked against the caller's
    tolerance.  Callers clip the interval to the density support first:
    integrating across a region where the integrand is identically zero
    defeats the error estimator.
    """
    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    t_lo = math.acos(min(max(1.0 - lam_lo, -1.0), 1.0))
    t_hi = math.acos(min(max(1.0 - lam_hi, -1.0), 1.0))
    if t_hi <= t_lo:
        return 0.0

    def g(t):
        return f(1.0 - math.cos(t)) * math.sin(t)

    val, err = scipy.integrate.quad(
        g, t_lo, t_hi, limit=300, epsabs=0.5 * quad_tol, epsrel=1e-10,
    )
    if err > quad_tol:
        raise QuadratureFailure(
            f"integral error {err:.2e} exceeds {quad_tol:.2e}"
        )
    return float(val)


def _quad_support(f, lam_lo: float, lam_hi: float, quad_tol: float,
                  intervals) -> float:
    """Integrate f over [lam_lo, lam_hi] clipped to the support intervals.

    Pieces narrower than 1e-12 are dropped: the density vanishes like a
    square root at each edge, so their mass is O(width^{3/2}), far
    below any usable tolerance.
    """
    pieces = []
    for s_lo, s_hi in intervals:
        lo, hi = max(lam_lo, s_lo), min(lam_hi, s_hi)
        if hi - lo > 1e-12:
            pieces.append((lo, hi))
    if not pieces:
        return 0.0
    tol = quad_tol / len(pieces)
    return sum(_quad_lambda(f, lo, hi, tol) for lo, hi in pieces)


@dataclass(frozen=True)
class AedSpec:
    """Limit spectrum of the projector sum for Rayleigh channels.

    ``eta_m = n_m / n_R`` are the antenna load factors.  The law has up
    to three point masses (at 0, 1, 2) plus a continuous density on
    (0, 2); ``density`` accepts scalars or arrays.
    """

    eta_A: float
    eta_B: float
    mass_at_0: float
    mass_at_1: float
    mass_at_2: float
    density: Callable[[np.ndarray], np.ndarray]

    def continuous_mass(self, quad_tol: float = 1e-8) -> float:
        return _quad_support(self.density, 0.0, 2.0, quad_tol,
                             _support_intervals(self.eta_A, self.eta_B))

    def total_mass(self, quad_tol: float = 1e-8) -> float:
        return (
            self.mass_at_0 + self.mass_at_1 + self.mass_at_2
            + self.continuous_mass(quad_tol)
        )

    def mean(self, quad_tol: float = 1e-8) -> float:
        val = _quad_support(lambda x: x * self.density(x), 0.0, 2.0, quad_tol,
                            _support_intervals(self.eta_A, self.eta_B))
        return float(self.mass_at_1 + 2.0 * self.mass_at_2 + val)


def aed(eta_A: float, eta_B: float) -> AedSpec:
    """Limit eigenvalue law for load factors in (0, 1].

    Point masses are [1-a-b]+ at 0, |a-b| at 1, [a+b-1]+ at 2; the
    continuous part is a deformed arcsine supported where the
    discriminant goes negative.
    """
    for e in (eta_A, eta_B):
        if not 0.0 < e <= 1.0:
            raise DomainError(f"load factor {e} outside (0, 1]")
    a, b = float(eta_A), float(eta_B)
    diff = a - b
    base = (1.0 - a - b) ** 2

    def density(lam):
        lam_arr = np.asarray(lam, dtype=float)
        scalar = lam_arr.ndim == 0
        x = np.atleast_1d(lam_arr).astype(float)
        out = np.zeros_like(x)
        inside = (x > 1e-12) & (x < 2.0 - 1e-12)
        if diff != 0.0:
            inside &= np.abs(x - 1.0) > 1e-9
        xi = x[inside]
        q = 2.0 * xi - xi * xi
        ratio2 = np.zeros_like(xi)
        if diff != 0.0:
            ratio2 = (diff / (xi - 1.0)) ** 2
        s = base - q * (1.0 - ratio2)
        neg = s < 0.0
        vals = np.zeros_like(xi)
        vals[neg] = np.sqrt(-s[neg]) / (np.pi * q[neg])
        out[inside] = vals
        return out[0] if scalar else out.reshape(lam_arr.shape)

    return AedSpec(
        eta_A=a,
        eta_B=b,
        mass_at_0=max(1.0 - a - b, 0.0),
        mass_at_1=abs(diff),
        mass_at_2=max(a + b - 1.0, 0.0),
        density=density,
    )


def _gap_integrand(lam):
    """Per-eigenvalue loss at the optimal split, in bits."""
    lam = np.asarray(lam, dtype=float)
    take_pnc = lam >= SPLIT_THRESHOLD
    safe = np.clip(lam * (2.0 - lam), 1e-300, None)
    return np.where(
        take_pnc, -np.log2(np.clip(lam, 1e-300, None) / 2.0),
        -0.5 * np.log2(safe),
    )


def normalized_gap(eta_A: float, eta_B: float, quad_tol: float = 1e-8) -> float:
    """Per-relay-antenna high-SNR gap averaged over the limit spectrum.

    Only eigenvalues in (1, 2) contribute: the loss vanishes at both 1
    and 2, so the point masses drop out and the integral splits at the
    8/5 threshold where the optimal routing switches.
    """
    spec = aed(eta_A, eta_B)

    def f(lam):
        return _gap_integrand(lam) * spec.density(lam)

    intervals = _support_intervals(spec.eta_A, spec.eta_B)
    total = 0.0
    for lo, hi in ((1.0, SPLIT_THRESHOLD), (SPLIT_THRESHOLD, 2.0)):
        total += _quad_support(f, lo, hi, quad_tol / 2.0, intervals)
    return float(total)


def support_edge(eta: float) -> float:
    """Upper edge of the continuous spectrum for equal load factors.

    Written as 1 + sqrt(4 eta (1 - eta)), the expanded equivalent of
    1 + sqrt(1 - (1-2 eta)^2), which evaluates exactly at eta = 1/10.
    """
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"load factor {eta} outside (0, 1]")
    return 1.0 + math.sqrt(max(4.0 * eta * (1.0 - eta), 0.0))


def symmetric_normalized_gap(eta: float, quad_tol: float = 1e-8,
                             branch: str = "auto") -> float:
    """Equal-load gap via the explicit two-branch form.

    For small loads the support never reaches 8/5 and a single integral
    suffices (``branch="low"``); otherwise it splits at the threshold
    (``branch="high"``).  Both branches agree at the crossover load 1/10,
    where the support edge hits 8/5 exactly.
    """
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"load factor {eta} outside (0, 1]")
    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    lam_star = support_edge(eta)
    c = (1.0 - 2.0 * eta) ** 2

    def g(lam):
        lam = np.asarray(lam, dtype=float)
        q = 2.0 * lam - lam * lam
        disc = np.clip(q - c, 0.0, None)
        return np.sqrt(disc) / (np.pi * q)

    if branch == "auto":
        branch = "low" if eta <= 0.1 else "high"
    if branch == "low":
        segments = [(1.0, lam_star, True)]
    elif branch == "high":
        segments = [(1.0, min(SPLIT_THRESHOLD, lam_star), True),
                    (SPLIT_THRESHOLD, lam_star, False)]
    else:
        raise ValueError(f"unknown branch {branch!r}")
    def f_cd(x):
        return -0.5 * np.log2(np.clip(x * (2 - x), 1e-300, None)) * g(x)
    def f_pnc(x):
        return -np.log2(x / 2.0) * g(x)
    total = 0.0
    for lo, hi, cd_side in segments:
        if hi - lo <= 1e-12:
            continue
        total += _quad_lambda(f_cd if cd_side else f_pnc, lo, hi,
                              quad_tol / len(segments))
    return float(total)


def approx_average_sum_rate(ub_average: float, n_R: int,
                            eta_A: float, eta_B: float,
                            quad_tol: float = 1e-8) -> float:
    """First-order large-system estimate: bound minus n_R times the gap."""
    if ub_average < 0:
        raise DomainError("average upper bound must be nonnegative")
    return float(ub_average - n_R * normalized_gap(eta_A, eta_B, quad_tol))


def planted_channel_pair(pair_lambdas, n_R: int, rng, k: int = 0,
                         d_A: int = 0, d_B: int = 0):
    """Synthetic uplink pair whose projector-sum spectrum is prescribed.

    Plants orthonormal bases at principal angles cos(theta_i) =
    lambda_i - 1 (one coordinate pair per planted eigenvalue, plus
    ``k`` shared and ``d_m`` exclusive coordinates) and multiplies by
    random nonsingular square factors, which leave the column spaces
    untouched.  Returns (H_A, H_B).
    """
    lam = np.asarray(pair_lambdas, dtype=float).ravel()
    if np.any(lam <= 1.0) or np.any(lam >= 2.0):
        raise DomainError("planted pair eigenvalues must lie in (1, 2)")
    l = lam.shape[0]
    n_A = k + l + d_A
    n_B = k + l + d_B
    need = k + 2 * l + d_A + d_B
    if n_R < need:
        raise DomainError(f"n_R = {n_R} cannot host {need} planted directions")
    UA = np.zeros((n_R, n_A), dtype=np.complex128)
    UB = np.zeros((n_R, n_B), dtype=np.complex128)
    for i in range(k):
        UA[i, i] = 1.0
        UB[i, i] = 1.0
    for i in range(l):
        r0 = k + 2 * i
        c = lam[i] - 1.0
        s = math.sqrt(max(1.0 - c * c, 0.0))
        UA[r0, k + i] = 1.0
        UB[r0, k + i] = c
        UB[r0 + 1, k + i] = s
    for j in range(d_A):
        UA[k + 2 * l + j, k + l + j] = 1.0
    for j in range(d_B):
        UB[k + 2 * l + d_A + j, k + l + j] = 1.0

    def mix(n):
        while True:
            C = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            if n == 0:
                return C
            sv = np.linalg.svd(C, compute_uv=False)
            if sv[-1] > 1e-6 * sv[0]:
                return C
    return UA @ mix(n_A), UB @ mix(n_B)
