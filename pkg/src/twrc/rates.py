"""Closed-form achievable rates for the two-way relay exchange.

Everything here is a pure function of channels, covariances, and noise
level.  Rates are in bits per channel use and carry the 1/2 pre-log of
the two-slot protocol; logs are base 2 throughout.  The combined scheme
rate is the sum of a complete-decoding part (a corner of the multiple-
access pentagon on the lower channel block) and a network-coding part
(per-stream rates on the projected upper block), capped by the downlink.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _projection
from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NotPSD,
    NotUnit,
    PowerViolation,
)
from .linalg import GsvdFactors, JointDecomposition, gsvd, rq_decompose

__all__ = [
    "PowerConfig",
    "TwrcInstance",
    "RatePair",
    "SdConfig",
    "MacPentagon",
    "RateRegion",
    "SdBlocks",
    "capacity_upper_bound",
    "mac_pentagon",
    "mac_cd_region",
    "pnc_rate_simo",
    "pnc_rate_mimo",
    "sd_effective_channels",
    "sd_uplink_rate",
    "downlink_rates",
    "sd_rate_pair",
    "simo_region",
    "default_relay_covariance",
]

_PSD_TOL = 1e-9
_TRACE_TOL = 1e-9


@dataclass(frozen=True)
class PowerConfig:
    """Per-node transmit budgets and the noise spectral level."""

    P_A: float
    P_B: float
    P_R: float
    N0: float = 1.0

    def __post_init__(self):
        vals = (self.P_A, self.P_B, self.P_R, self.N0)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("power configuration must be finite")
        if self.P_A < 0 or self.P_B < 0 or self.P_R < 0:
            raise ValueError("powers must be nonnegative")
        if self.N0 <= 0:
            raise ValueError("noise level must be positive")


def _matrix(H, name, dtype=np.complex128):
    H = np.asarray(H, dtype=dtype)
    if H.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {H.shape}")
    return H


@dataclass(frozen=True)
class TwrcInstance:
    """One channel realization: two uplinks, two downlinks, and budgets."""

    H_AR: np.ndarray
    H_BR: np.ndarray
    H_RA: np.ndarray
    H_RB: np.ndarray
    power: PowerConfig

    def __post_init__(self):
        for name in ("H_AR", "H_BR", "H_RA", "H_RB"):
            object.__setattr__(self, name, _matrix(getattr(self, name), name))
        n_R = self.H_AR.shape[0]
        ok = (
            self.H_BR.shape[0] == n_R
            and self.H_RA.shape == (self.H_AR.shape[1], n_R)
            and self.H_RB.shape == (self.H_BR.shape[1], n_R)
        )
        if not ok:
            raise DimensionMismatch(
                "uplink/downlink shapes inconsistent: "
                f"{self.H_AR.shape}, {self.H_BR.shape}, "
                f"{self.H_RA.shape}, {self.H_RB.shape}"
            )

    @classmethod
    def from_uplink(cls, H_AR, H_BR, power: PowerConfig) -> "TwrcInstance":
        """Build an instance with reciprocal downlinks (transposes)."""
        H_AR = _matrix(H_AR, "H_AR")
        H_BR = _matrix(H_BR, "H_BR")
        return cls(H_AR, H_BR, H_AR.T.copy(), H_BR.T.copy(), power)

    @property
    def n_A(self) -> int:
        return self.H_AR.shape[1]

    @property
    def n_B(self) -> int:
        return self.H_BR.shape[1]

    @property
    def n_R(self) -> int:
        return self.H_AR.shape[0]


@dataclass(frozen=True)
class RatePair:
    """An achievable (R_A, R_B) point in bits per channel use.

    Infinity is tolerated as a no-constraint sentinel for intersection
    arithmetic; rate computations always return finite values.
    """

    R_A: float
    R_B: float

    def __post_init__(self):
        for v in (self.R_A, self.R_B):
            if math.isnan(v) or v < 0:
                raise ValueError(f"rates must be nonnegative, got {v}")

    @property
    def sum_rate(self) -> float:
        return self.R_A + self.R_B

    def min_with(self, other: "RatePair") -> "RatePair":
        return RatePair(min(self.R_A, other.R_A), min(self.R_B, other.R_B))


@dataclass(frozen=True)
class SdConfig:
    """One cell of the scheme's search space: split index, powers, weights."""

    l_prime: int
    cd_power_A: float
    cd_power_B: float
    w_A: float = 1.0
    w_B: float = 1.0

    def __post_init__(self):
        if self.l_prime < 0:
            raise ValueError("l_prime must be nonnegative")
        if self.cd_power_A < 0 or self.cd_power_B < 0:
            raise ValueError("block powers must be nonnegative")
        if self.w_A < 0 or self.w_B < 0 or self.w_A + self.w_B <= 0:
            raise ValueError("weights must be nonnegative, not both zero")


@dataclass(frozen=True)
class MacPentagon:
    """Multiple-access region {R_A <= S_A, R_B <= S_B, R_A+R_B <= S_AB}."""

    S_A: float
    S_B: float
    S_AB: float

    def corner(self, w_A: float, w_B: float) -> RatePair:
        """Dominant-face vertex for a weighted objective.

        The heavier user is decoded last and gets its individual bound;
        ties go to user A.
        """
        if w_A >= w_B:
            r_a = min(self.S_A, self.S_AB)
            return RatePair(r_a, max(self.S_AB - r_a, 0.0))
        r_b = min(self.S_B, self.S_AB)
        return RatePair(max(self.S_AB - r_b, 0.0), r_b)

    def vertices(self) -> np.ndarray:
        ra2 = max(self.S_AB - self.S_B, 0.0)
        rb2 = max(self.S_AB - self.S_A, 0.0)
        return np.array(
            [
                [0.0, 0.0],
                [self.S_A, 0.0],
                [self.S_A, rb2],
                [ra2, self.S_B],
                [0.0, self.S_B],
            ]
        )


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull(pts: np.ndarray) -> np.ndarray:
    """Counterclockwise convex hull (monotone chain), degenerate-safe."""
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 1e-12, axis=1)
    pts = pts[keep]
    if len(pts) <= 2:
        return pts
    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 1e-14:
                out.pop()
            out.append(p)
        return out
    lower = chain(pts)
    upper = chain(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


@dataclass(frozen=True)
class RateRegion:
    """Convex achievable region as a counterclockwise vertex polygon."""

    vertices: np.ndarray

    @classmethod
    def from_points(cls, points) -> "RateRegion":
        """Time-sharing closure of achievable points with free disposal.

        The origin and each point's axis projections are implied
        achievable, so they join the hull.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            pts = np.zeros((0, 2))
        if pts.shape[1] != 2:
            raise DimensionMismatch("region points must be pairs")
        aug = [np.zeros((1, 2)), pts]
        if len(pts):
            aug.append(np.column_stack([pts[:, 0], np.zeros(len(pts))]))
            aug.append(np.column_stack([np.zeros(len(pts)), pts[:, 1]]))
        return cls(_hull(np.vstack(aug)))

    def contains(self, r_a: float, r_b: float, tol: float = 1e-9) -> bool:
        v = self.vertices
        if len(v) == 0:
            return False
        if len(v) == 1:
            return bool(np.all(np.abs([r_a, r_b] - v[0]) <= tol))
        p = np.array([r_a, r_b])
        if len(v) == 2:
            d = v[1] - v[0]
            t = np.dot(p - v[0], d) / max(np.dot(d, d), 1e-300)
            return bool(np.linalg.norm(v[0] + np.clip(t, 0, 1) * d - p) <= tol)
        scale = max(1.0, float(np.max(np.abs(v))))
        return all(
            _cross(v[i], v[(i + 1) % len(v)], p) >= -tol * scale
            for i in range(len(v))
        )

    @property
    def pareto_points(self) -> np.ndarray:
        """Vertices not weakly dominated by another vertex, R_A ascending."""
        v = self.vertices
        out = []
        for i, p in enumerate(v):
            dominated = any(
                j != i and q[0] >= p[0] - 1e-12 and q[1] >= p[1] - 1e-12
                and (q[0] > p[0] + 1e-12 or q[1] > p[1] + 1e-12)
                for j, q in enumerate(v)
            )
            if not dominated:
                out.append(p)
        out = np.array(out) if out else np.zeros((0, 2))
        return out[np.argsort(out[:, 0])] if len(out) else out

    def clipped(self, ra_max: float, rb_max: float) -> "RateRegion":
        """Intersection with the rectangle [0, ra_max] x [0, rb_max]."""
        poly = self.vertices
        for idx, bound in ((0, ra_max), (1, rb_max)):
            if not math.isfinite(bound):
                continue
            out = []
            n = len(poly)
            for i in range(n):
                cur, nxt = poly[i], poly[(i + 1) % n]
                cin = cur[idx] <= bound + 1e-12
                nin = nxt[idx] <= bound + 1e-12
                if cin:
                    out.append(cur)
                if cin != nin:
                    t = (bound - cur[idx]) / (nxt[idx] - cur[idx])
                    out.append(cur + t * (nxt - cur))
            poly = np.array(out) if out else np.zeros((0, 2))
            if len(poly) == 0:
                break
        return RateRegion(_hull(poly) if len(poly) else poly)


def _check_psd(Q, name: str) -> np.ndarray:
    Q = _matrix(Q, name)
    if Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {Q.shape}")
    if Q.shape[0] == 0:
        return Q
    if np.linalg.norm(Q - Q.conj().T) > _PSD_TOL * max(1.0, np.linalg.norm(Q)):
        raise NotPSD(f"{name} is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
    if w[0] < -_PSD_TOL:
        raise NotPSD(f"{name} has eigenvalue {w[0]:.3e} < -1e-9")
    return Q


def _check_trace(Q, budget: float, name: str):
    tr = float(np.trace(Q).real) if Q.size else 0.0
    if tr > budget + _TRACE_TOL:
        raise PowerViolation(f"tr({name}) = {tr:.6g} exceeds budget {budget:.6g}")


def _logdet_rate(H, Q, n0: float) -> float:
    """0.5 * log2 det(I + H Q H' / n0); empty factors contribute nothing."""
    if H.shape[1] == 0 or H.shape[0] == 0:
        return 0.0
    K = np.eye(H.shape[0], dtype=np.complex128) + (H @ Q @ H.conj().T) / n0
    sign, logdet = np.linalg.slogdet(K)
    if sign.real <= 0:
        raise NotPSD("log-det argument not positive definite")
    return max(0.5 * logdet / math.log(2.0), 0.0)


def capacity_upper_bound(ch: TwrcInstance, Q_A, Q_B, Q_R):
    """Cut-set style bounds: two uplink log-dets and the cross-paired downlinks.

    Returns (ul_A, ul_B, dl_A, dl_B).  The downlink of user A's message
    is through the relay-to-B channel, and vice versa.
    """
    Q_A = _check_psd(Q_A, "Q_A")
    Q_B = _check_psd(Q_B, "Q_B")
    Q_R = _check_psd(Q_R, "Q_R")
    _check_trace(Q_A, ch.power.P_A, "Q_A")
    _check_trace(Q_B, ch.power.P_B, "Q_B")
    _check_trace(Q_R, ch.power.P_R, "Q_R")
    n0 = ch.power.N0
    ul_a = _logdet_rate(ch.H_AR, Q_A, n0)
    ul_b = _logdet_rate(ch.H_BR, Q_B, n0)
    dl_a = _logdet_rate(ch.H_RB, Q_R, n0)
    dl_b = _logdet_rate(ch.H_RA, Q_R, n0)
    return ul_a, ul_b, dl_a, dl_b


def mac_pentagon(H_eff_A, H_eff_B, Q_A, Q_B, n0: float) -> MacPentagon:
    """Pentagon of jointly decodable rates on the given effective channels."""
    Q_A = _check_psd(Q_A, "Q_A")
    Q_B = _check_psd(Q_B, "Q_B")
    H_eff_A = _matrix(H_eff_A, "H_eff_A")
    H_eff_B = _matrix(H_eff_B, "H_eff_B")
    if H_eff_A.shape[1] != Q_A.shape[0] or H_eff_B.shape[1] != Q_B.shape[0]:
        raise DimensionMismatch("effective channels do not conform with covariances")
    if H_eff_A.shape[0] != H_eff_B.shape[0]:
        raise DimensionMismatch("effective channels must share the receive space")
    s_a = _logdet_rate(H_eff_A, Q_A, n0)
    s_b = _logdet_rate(H_eff_B, Q_B, n0)
    rows = H_eff_A.shape[0]
    K = np.eye(rows, dtype=np.complex128)
    if H_eff_A.shape[1]:
        K = K + (H_eff_A @ Q_A @ H_eff_A.conj().T) / n0
    if H_eff_B.shape[1]:
        K = K + (H_eff_B @ Q_B @ H_eff_B.conj().T) / n0
    s_ab = max(0.5 * np.linalg.slogdet(K)[1] / math.log(2.0), 0.0) if rows else 0.0
    return MacPentagon(S_A=s_a, S_B=s_b, S_AB=s_ab)


def mac_cd_region(ch: TwrcInstance, Q_A, Q_B, H_eff_A, H_eff_B) -> MacPentagon:
    """Pentagon of jointly decodable rates at the instance's noise level."""
    return mac_pentagon(H_eff_A, H_eff_B, Q_A, Q_B, ch.power.N0)


def _positive_part_log2(t: float) -> float:
    return 0.5 * math.log2(t) if t > 1.0 else 0.0


def pnc_rate_simo(p, h_A, h_B, Q_A: float, Q_B: float, N0: float,
                  mmse: bool = False) -> RatePair:
    """Rates of the single combined stream the relay decodes.

    Plain form keeps only the SNR term; the lattice/MMSE form adds the
    self-signal fraction of the combined power inside the log, which can
    only help and coincides with the plain form at high SNR.
    """
    p = np.asarray(p, dtype=np.complex128).ravel()
    h_A = np.asarray(h_A, dtype=np.complex128).ravel()
    h_B = np.asarray(h_B, dtype=np.complex128).ravel()
    if not (p.shape == h_A.shape == h_B.shape):
        raise DimensionMismatch("p, h_A, h_B must share a length")
    nrm = np.linalg.norm(p)
    if abs(nrm - 1.0) > 1e-10:
        raise NotUnit(f"projection norm {nrm!r} deviates from 1")
    if Q_A < 0 or Q_B < 0:
        raise PowerViolation("negative transmit power")
    g_a = abs(np.vdot(p, h_A)) ** 2
    g_b = abs(np.vdot(p, h_B)) ** 2
    den = Q_A * g_a + Q_B * g_b
    rates = []
    for Q, g in ((Q_A, g_a), (Q_B, g_b)):
        t = Q * g / N0
        if mmse and den > 0.0:
            t += Q * g / den
        rates.append(_positive_part_log2(t))
    return RatePair(*rates)


def pnc_rate_mimo(fac: GsvdFactors, psi_A, psi_B, N0: float,
                  indicator_all_streams: bool = False) -> RatePair:
    """Per-stream combined-codeword rates after the triangularization.

    Stream i carries gain rtilde_ii^2 sigma_mi^2 psi_mi / N0; only the
    first stream additionally sees the self-signal fraction (all streams
    when ``indicator_all_streams``).  A vanished denominator drops the
    fraction, which is its continuous limit.
    """
    psi_A = np.asarray(psi_A, dtype=float).ravel()
    psi_B = np.asarray(psi_B, dtype=float).ravel()
    n = fac.Sigma_A.shape[0]
    if psi_A.shape[0] != n or psi_B.shape[0] != n:
        raise DimensionMismatch(
            f"need {n} stream powers, got {psi_A.shape[0]}, {psi_B.shape[0]}"
        )
    if np.any(psi_A < 0) or np.any(psi_B < 0):
        raise PowerViolation("stream powers must be nonnegative")
    s2a = fac.sigma_A ** 2
    s2b = fac.sigma_B ** 2
    rt2 = fac.r_diag ** 2
    out = []
    for s2m, psim in ((s2a, psi_A), (s2b, psi_B)):
        r = 0.0
        for i in range(n):
            num = s2m[i] * psim[i]
            den = s2a[i] * psi_A[i] + s2b[i] * psi_B[i]
            t = rt2[i] * num / N0
            if (i == 0 or indicator_all_streams) and den > 0.0:
                t += num / den
            r += _positive_part_log2(t)
        out.append(r)
    return RatePair(*out)


@dataclass(frozen=True)
class SdBlocks:
    """Effective channels after the joint factorization is partitioned.

    ``H_cd_m`` feed the complete-decoding multiple-access stage (their
    shared row space is the complement coordinates); ``Ht_m`` are the
    square projected channels of the network-coded streams, empty when
    the split routes everything to complete decoding.
    """

    H_cd_A: np.ndarray
    H_cd_B: np.ndarray
    Ht_A: np.ndarray
    Ht_B: np.ndarray
    l_prime: int


def sd_effective_channels(jd: JointDecomposition, l_prime: int,
                          w_A: float = 1.0, w_B: float = 1.0) -> SdBlocks:
    """Partition the factored channels at a chosen pair count.

    The common block plus the first ``l_prime`` direction pairs are
    projected (one unit direction per pair, weight-dependent) into
    square upper channels; remaining coordinates form the lower
    complete-decoding channels.
    """
    if not 0 <= l_prime <= jd.l:
        raise IndexOutOfRange(f"l_prime {l_prime} outside [0, {jd.l}]")
    kl = jd.k + l_prime
    cut = jd.k + 2 * l_prime
    blocks = []
    for D, G, which in ((jd.D_A, jd.G_A, "A"), (jd.D_B, jd.G_B, "B")):
        R, _ = rq_decompose(G)
        H_cd = D[cut:, kl:] @ R[kl:, kl:]
        diag = np.ones(kl)
        for i in range(jd.k, kl):
            lam = jd.lambdas[i]
            p = _projection.pair_direction(lam, w_A, w_B)
            e2 = np.sqrt((2.0 - lam) / 2.0)
            e = np.array([np.sqrt(lam / 2.0), e2 if which == "A" else -e2])
            diag[i] = p @ e
        Ht = diag[:, None] * R[:kl, :kl]
        blocks.append((H_cd, Ht))
    return SdBlocks(
        H_cd_A=blocks[0][0], H_cd_B=blocks[1][0],
        Ht_A=blocks[0][1], Ht_B=blocks[1][1], l_prime=l_prime,
    )


def sd_uplink_rate(ch: TwrcInstance, jd: JointDecomposition, cfg: SdConfig,
                   Q_cd_A, Q_cd_B, psi_A, psi_B,
                   indicator_all_streams: bool = False) -> RatePair:
    """Uplink rate of one configured cell: pentagon corner plus stream sum.

    Power accounting is per user across both blocks:
    tr(Q_cd_m) + sum(psi_m) <= P_m.
    """
    Q_cd_A = _check_psd(Q_cd_A, "Q_cd_A")
    Q_cd_B = _check_psd(Q_cd_B, "Q_cd_B")
    psi_A = np.asarray(psi_A, dtype=float).ravel()
    psi_B = np.asarray(psi_B, dtype=float).ravel()
    for Q, psi, P, name in (
        (Q_cd_A, psi_A, ch.power.P_A, "A"),
        (Q_cd_B, psi_B, ch.power.P_B, "B"),
    ):
        spent = (float(np.trace(Q).real) if Q.size else 0.0) + float(psi.sum())
        if spent > P + _TRACE_TOL:
            raise PowerViolation(
                f"user {name} spends {spent:.6g} of budget {P:.6g}"
            )
    blocks = sd_effective_channels(jd, cfg.l_prime, cfg.w_A, cfg.w_B)
    cd = RatePair(0.0, 0.0)
    if blocks.H_cd_A.shape[1] or blocks.H_cd_B.shape[1]:
        pent = mac_cd_region(ch, Q_cd_A, Q_cd_B, blocks.H_cd_A, blocks.H_cd_B)
        cd = pent.corner(cfg.w_A, cfg.w_B)
    pnc = RatePair(0.0, 0.0)
    kl = jd.k + cfg.l_prime
    if kl > 0:
        fac = gsvd(blocks.Ht_A, blocks.Ht_B)
        pnc = pnc_rate_mimo(fac, psi_A, psi_B, ch.power.N0,
                            indicator_all_streams)
    elif psi_A.size or psi_B.size:
        raise DimensionMismatch("stream powers given but no projected streams")
    return RatePair(cd.R_A + pnc.R_A, cd.R_B + pnc.R_B)


def default_relay_covariance(n_R: int, P_R: float) -> np.ndarray:
    """Equal-power relay covariance (P_R/n_R) I."""
    return (P_R / n_R) * np.eye(n_R, dtype=np.complex128) if n_R else np.zeros((0, 0), dtype=np.complex128)


def downlink_rates(ch: TwrcInstance, Q_R) -> RatePair:
    """Broadcast-phase rates; each user decodes the other's message."""
    Q_R = _check_psd(Q_R, "Q_R")
    _check_trace(Q_R, ch.power.P_R, "Q_R")
    n0 = ch.power.N0
    return RatePair(
        _logdet_rate(ch.H_RB, Q_R, n0),
        _logdet_rate(ch.H_RA, Q_R, n0),
    )


def sd_rate_pair(uplink: RatePair, downlink: RatePair) -> RatePair:
    """Componentwise bottleneck of the two phases."""
    return uplink.min_with(downlink)


def simo_region(ch: TwrcInstance, weight_grid, mmse: bool = False) -> RateRegion:
    """Uplink region for single-antenna users, capped by the downlink box.

    Convex hull of the joint-decoding pentagon and the projected-stream
    points traced over the given w_A/w_B ratios at full power, then
    clipped by the equal-power downlink rectangle.
    """
    if ch.n_A != 1 or ch.n_B != 1:
        raise DimensionMismatch("region tracing requires single-antenna users")
    h_a = ch.H_AR[:, 0]
    h_b = ch.H_BR[:, 0]
    P_A, P_B, n0 = ch.power.P_A, ch.power.P_B, ch.power.N0
    pent = mac_cd_region(
        ch,
        np.array([[P_A]], dtype=np.complex128),
        np.array([[P_B]], dtype=np.complex128),
        h_a[:, None],
        h_b[:, None],
    )
    pts = [pent.vertices()]
    ratios = [float(r) for r in weight_grid]
    if ratios:
        nh_a = np.linalg.norm(h_a)
        nh_b = np.linalg.norm(h_b)
        dirs = [h_a / nh_a, h_b / nh_b] if nh_a > 0 and nh_b > 0 else []
        dirs += [
            _projection.optimal_direction(h_a, h_b, r, 1.0) for r in ratios
        ]
        for p in dirs:
            rp = pnc_rate_simo(p, h_a, h_b, P_A, P_B, n0, mmse=mmse)
            pts.append(np.array([[rp.R_A, rp.R_B]]))
    region = RateRegion.from_points(np.vstack(pts))
    dl = downlink_rates(ch, default_relay_covariance(ch.n_R, ch.power.P_R))
    return region.clipped(dl.R_A, dl.R_B)
