"""Optimizers for the relay scheme's free parameters.

Four layers: the closed-form combining direction, covariance shaping for
the jointly decoded block (concave, solved by projected gradient with a
water-filling warm start), per-stream power allocation for the combined-
codeword block (mildly nonconvex, multi-start coordinate ascent), and
the outer exhaustive search over the pair split and per-user power
fractions.  All searches are deterministic for a fixed settings object.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, _projection
from .errors import IndexOutOfRange, NonConvergenceWarning, TwrcError
from .linalg import GsvdFactors, JointDecomposition, gsvd
from .rates import (
    MacPentagon,
    RatePair,
    RateRegion,
    SdConfig,
    TwrcInstance,
    default_relay_covariance,
    downlink_rates,
    mac_pentagon,
    pnc_rate_mimo,
    sd_effective_channels,
)

__all__ = [
    "WeightedObjective",
    "OptimizerSettings",
    "MacSolution",
    "PncAllocation",
    "SdSolution",
    "optimal_projection_simo",
    "projection_matrix",
    "mac_covariance_optimize",
    "pnc_power_allocate",
    "sd_optimize",
    "trace_region",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class WeightedObjective:
    """Nonnegative rate weights, not both zero."""

    w_A: float = 1.0
    w_B: float = 1.0

    def __post_init__(self):
        ok = (
            math.isfinite(self.w_A) and math.isfinite(self.w_B)
            and self.w_A >= 0 and self.w_B >= 0 and self.w_A + self.w_B > 0
        )
        if not ok:
            raise ValueError("weights must be finite, nonnegative, not both zero")


def _default_grid():
    return tuple(np.linspace(0.0, 1.0, 11))


def _default_sweep():
    return tuple(np.logspace(-6.0, 6.0, 25, base=2.0))


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs shared by the iterative solvers and the outer search."""

    gradient_tol: float = 1e-6
    max_iters: int = 500
    power_split_grid: tuple = field(default_factory=_default_grid)
    weight_sweep: tuple = field(default_factory=_default_sweep)

    def __post_init__(self):
        if self.gradient_tol <= 0:
            raise ValueError("gradient_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        grid = tuple(float(f) for f in self.power_split_grid)
        if (
            len(grid) < 2
            or any(b <= a for a, b in zip(grid, grid[1:]))
            or grid[0] != 0.0
            or grid[-1] != 1.0
        ):
            raise ValueError(
                "power_split_grid must ascend from 0.0 to 1.0 with >= 2 points"
            )
        sweep = tuple(float(r) for r in self.weight_sweep)
        if any(not math.isfinite(r) or r <= 0 for r in sweep):
            raise ValueError("weight_sweep ratios must be positive and finite")
        object.__setattr__(self, "power_split_grid", grid)
        object.__setattr__(self, "weight_sweep", sweep)


def optimal_projection_simo(h_A, h_B, w: WeightedObjective) -> np.ndarray:
    """Closed-form unit combining vector for two vector channels.

    Solves the weighted log-gain maximization on the stacked real
    embedding of the channels; equal weights give the angular bisector
    (of h_A and -h_B when the embedded inner product is negative), and a
    zero weight aligns with the other user's channel.
    """
    return _projection.optimal_direction(h_A, h_B, w.w_A, w.w_B)


def projection_matrix(jd: JointDecomposition, l_prime: int,
                      w: WeightedObjective) -> np.ndarray:
    """Stacked per-pair combining directions for the projected block.

    Identity on the common coordinates, then one unit 2-vector per kept
    pair; with equal weights every pair collapses onto its first
    coordinate.
    """
    if not 0 <= l_prime <= jd.l:
        raise IndexOutOfRange(f"l_prime {l_prime} outside [0, {jd.l}]")
    k = jd.k
    P = np.zeros((k + 2 * l_prime, k + l_prime))
    P[:k, :k] = np.eye(k)
    for i in range(l_prime):
        p = _projection.pair_direction(jd.lambdas[k + i], w.w_A, w.w_B)
        P[k + 2 * i : k + 2 * i + 2, k + i] = p
    return P


@dataclass(frozen=True)
class MacSolution:
    Q_A: np.ndarray
    Q_B: np.ndarray
    rates: RatePair
    pentagon: MacPentagon
    converged: bool
    grad_norm: float


def _waterfill_cov(H, P, n0):
    """Single-user capacity-achieving covariance, trace exactly min(P, spent)."""
    n = H.shape[1]
    if n == 0 or P <= 0:
        return np.zeros((n, n), dtype=np.complex128)
    _, s, Vh = np.linalg.svd(H, full_matrices=False)
    g = np.zeros(n)
    g[: s.shape[0]] = s**2 / n0
    p = _kernels.water_fill(g, P)
    V = np.eye(n, dtype=np.complex128)
    V[:, : Vh.shape[0]] = Vh.conj().T
    return (V * p) @ V.conj().T


def _psd_trace_project(Q, P):
    """Frobenius projection onto {Q >= 0, tr Q <= P}.

    Reduces to projecting the eigenvalue vector onto the simplex when
    clipping alone overshoots the trace budget.
    """
    if Q.shape[0] == 0:
        return Q
    w, V = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    x = np.maximum(w, 0.0)
    if x.sum() > P:
        u = np.sort(w)[::-1]
        cssv = np.cumsum(u) - P
        idx = np.arange(1, len(u) + 1)
        active = u - cssv / idx > 0
        if np.any(active):
            rho = idx[active][-1]
            x = np.maximum(w - cssv[rho - 1] / rho, 0.0)
        else:
            x = np.zeros_like(w)
    return (V * x) @ V.conj().T


def mac_covariance_optimize(H_eff_A, H_eff_B, P_A: float, P_B: float,
                            N0: float, w: WeightedObjective,
                            s: OptimizerSettings) -> MacSolution:
    """Input covariances maximizing the weighted corner objective.

    With the heavier user decoded last, the objective
    (w_last - w_first) R_last + w_first S_sum is concave in (Q_A, Q_B);
    projected gradient ascent from water-filled warm starts reaches a
    point whose gradient-mapping norm certifies optimality.  Equal
    weights get an iterative water-filling pre-pass, which is exact for
    the sum rate.
    """
    HA = np.asarray(H_eff_A, dtype=np.complex128)
    HB = np.asarray(H_eff_B, dtype=np.complex128)
    nA, nB = HA.shape[1], HB.shape[1]
    a_last = w.w_A >= w.w_B
    w_last = w.w_A if a_last else w.w_B
    w_first = w.w_B if a_last else w.w_A
    H_last = HA if a_last else HB
    P_last = P_A if a_last else P_B

    def objective_and_grads(QA, QB):
        rows = HA.shape[0]
        K = np.eye(rows, dtype=np.complex128)
        if nA:
            K = K + (HA @ QA @ HA.conj().T) / N0
        if nB:
            K = K + (HB @ QB @ HB.conj().T) / N0
        Ki = np.linalg.inv(K)
        val = w_first * 0.5 * np.linalg.slogdet(K)[1] / _LN2
        gA = w_first * HA.conj().T @ Ki @ HA / (2 * _LN2 * N0) if nA else np.zeros((0, 0))
        gB = w_first * HB.conj().T @ Ki @ HB / (2 * _LN2 * N0) if nB else np.zeros((0, 0))
        if w_last > w_first:
            Q_last = QA if a_last else QB
            if H_last.shape[1]:
                K1 = np.eye(rows, dtype=np.complex128) + (H_last @ Q_last @ H_last.conj().T) / N0
                K1i = np.linalg.inv(K1)
                val += (w_last - w_first) * 0.5 * np.linalg.slogdet(K1)[1] / _LN2
                g1 = (w_last - w_first) * H_last.conj().T @ K1i @ H_last / (2 * _LN2 * N0)
                if a_last:
                    gA = gA + g1
                else:
                    gB = gB + g1
        return float(val.real), gA, gB

    QA = _waterfill_cov(HA, P_A, N0)
    QB = _waterfill_cov(HB, P_B, N0)
    if w.w_A == w.w_B and nA and nB:
        QA2, QB2 = QA.copy(), QB.copy()
        _kernels.mac_sum_iwf(np.ascontiguousarray(HA), np.ascontiguousarray(HB),
                             float(P_A), float(P_B), 1.0 / N0, QA2, QB2,
                             200, 1e-12)
        QA, QB = QA2, QB2
    val, gA, gB = objective_and_grads(QA, QB)
    step = 1.0
    converged = False
    grad_norm = np.inf
    for _ in range(s.max_iters):
        PA_ = _psd_trace_project(QA + gA, P_A)
        PB_ = _psd_trace_project(QB + gB, P_B)
        grad_norm = np.sqrt(
            np.linalg.norm(PA_ - QA) ** 2 + np.linalg.norm(PB_ - QB) ** 2
        )
        if grad_norm < s.gradient_tol:
            converged = True
            break
        while step > 1e-18:
            QA_n = _psd_trace_project(QA + step * gA, P_A)
            QB_n = _psd_trace_project(QB + step * gB, P_B)
            gain = (
                np.vdot(gA, QA_n - QA).real + np.vdot(gB, QB_n - QB).real
            )
            val_n, gA_n, gB_n = objective_and_grads(QA_n, QB_n)
            if val_n >= val + 1e-4 * gain - 1e-15:
                QA, QB, val, gA, gB = QA_n, QB_n, val_n, gA_n, gB_n
                step = min(step * 1.5, 1e6)
                break
            step *= 0.5
        else:
            break
    if not converged:
        warnings.warn(
            f"covariance ascent stopped at gradient norm {grad_norm:.2e}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    pent = mac_pentagon(HA, HB, QA, QB, N0)
    return MacSolution(
        Q_A=QA, Q_B=QB, rates=pent.corner(w.w_A, w.w_B), pentagon=pent,
        converged=converged, grad_norm=float(grad_norm),
    )


@dataclass(frozen=True)
class PncAllocation:
    psi_A: np.ndarray
    psi_B: np.ndarray
    rates: RatePair
    converged: bool


def pnc_power_allocate(fac: GsvdFactors, budget_A: float, budget_B: float,
                       N0: float, w: WeightedObjective, s: OptimizerSettings,
                       indicator_all_streams: bool = False) -> PncAllocation:
    """Per-stream powers maximizing the weighted combined-codeword rates.

    Seeded by the interference-free surrogate (and two fallback seeds),
    then pairwise-transfer coordinate ascent on the exact objective; a
    slack slot lets a user leave budget unspent when its first-stream
    power only feeds the other user's denominator.
    """
    if budget_A < 0 or budget_B < 0:
        raise ValueError("budgets must be nonnegative")
    s2a = fac.sigma_A ** 2
    s2b = fac.sigma_B ** 2
    rt2 = fac.r_diag ** 2
    psi_a, psi_b, _, settled = _kernels.pnc_allocate(
        s2a, s2b, rt2, float(budget_A), float(budget_B), 1.0 / N0,
        w.w_A, w.w_B, indicator_all_streams, s.max_iters, 1e-9,
    )
    if not settled:
        warnings.warn(
            "stream allocation hit its sweep cap", NonConvergenceWarning,
            stacklevel=2,
        )
    rates = pnc_rate_mimo(fac, psi_a, psi_b, N0, indicator_all_streams)
    return PncAllocation(psi_A=psi_a, psi_B=psi_b, rates=rates,
                         converged=bool(settled))


@dataclass(frozen=True)
class SdSolution:
    cfg: SdConfig
    Q_cd_A: np.ndarray
    Q_cd_B: np.ndarray
    psi_A: np.ndarray
    psi_B: np.ndarray
    rates: RatePair
    pentagon: MacPentagon
    objective: float
    converged: bool


def sd_optimize(ch: TwrcInstance, jd: JointDecomposition,
                w: WeightedObjective, s: OptimizerSettings,
                indicator_all_streams: bool = False) -> SdSolution:
    """Exhaustive search over pair split and per-user power fractions.

    Every cell solves the covariance and stream-power subproblems on the
    partitioned blocks; a failing cell is skipped, not fatal.  Returns
    the best cell's configuration, certificates, and rates.
    """
    n0 = ch.power.N0
    P_A, P_B = ch.power.P_A, ch.power.P_B
    best = None
    last_err = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        for l_prime in range(jd.l + 1):
            try:
                blocks = sd_effective_channels(jd, l_prime, w.w_A, w.w_B)
                kl = jd.k + l_prime
                fac = gsvd(blocks.Ht_A, blocks.Ht_B) if kl else None
            except TwrcError as e:
                last_err = e
                continue
            na, nb = blocks.H_cd_A.shape[1], blocks.H_cd_B.shape[1]
            for fa in s.power_split_grid:
                if na == 0 and fa > 0.0:
                    break
                if kl == 0 and fa < 1.0:
                    continue
                for fb in s.power_split_grid:
                    if nb == 0 and fb > 0.0:
                        break
                    if kl == 0 and fb < 1.0:
                        continue
                    try:
                        cell = _solve_cell(
                            ch, blocks, fac, kl, fa if na else 0.0,
                            fb if nb else 0.0, P_A, P_B, n0, w, s,
                            indicator_all_streams, l_prime,
                        )
                    except TwrcError as e:
                        last_err = e
                        continue
                    if best is None or cell.objective > best.objective + 1e-15:
                        best = cell
    if best is None:
        raise last_err if last_err is not None else TwrcError("empty search space")
    return best


def _solve_cell(ch, blocks, fac, kl, fa, fb, P_A, P_B, n0, w, s,
                indicator_all, l_prime) -> SdSolution:
    na, nb = blocks.H_cd_A.shape[1], blocks.H_cd_B.shape[1]
    cd_rates = RatePair(0.0, 0.0)
    pent = MacPentagon(0.0, 0.0, 0.0)
    QA = np.zeros((na, na), dtype=np.complex128)
    QB = np.zeros((nb, nb), dtype=np.complex128)
    mac_ok = True
    if (na or nb) and (fa * P_A > 0 or fb * P_B > 0):
        sol = mac_covariance_optimize(
            blocks.H_cd_A, blocks.H_cd_B, fa * P_A, fb * P_B, n0, w, s
        )
        QA, QB, cd_rates, pent = sol.Q_A, sol.Q_B, sol.rates, sol.pentagon
        mac_ok = sol.converged
    pnc_rates = RatePair(0.0, 0.0)
    psi_a = np.zeros(kl)
    psi_b = np.zeros(kl)
    pnc_ok = True
    if kl:
        bA = (1.0 - fa) * P_A if na else P_A
        bB = (1.0 - fb) * P_B if nb else P_B
        alloc = pnc_power_allocate(fac, bA, bB, n0, w, s, indicator_all)
        psi_a, psi_b, pnc_rates = alloc.psi_A, alloc.psi_B, alloc.rates
        pnc_ok = alloc.converged
    rates = RatePair(cd_rates.R_A + pnc_rates.R_A, cd_rates.R_B + pnc_rates.R_B)
    shifted = MacPentagon(
        S_A=pent.S_A + pnc_rates.R_A,
        S_B=pent.S_B + pnc_rates.R_B,
        S_AB=pent.S_AB + pnc_rates.R_A + pnc_rates.R_B,
    )
    cfg = SdConfig(
        l_prime=l_prime,
        cd_power_A=float(np.trace(QA).real) if QA.size else 0.0,
        cd_power_B=float(np.trace(QB).real) if QB.size else 0.0,
        w_A=w.w_A, w_B=w.w_B,
    )
    return SdSolution(
        cfg=cfg, Q_cd_A=QA, Q_cd_B=QB, psi_A=psi_a, psi_B=psi_b,
        rates=rates, pentagon=shifted,
        objective=w.w_A * rates.R_A + w.w_B * rates.R_B,
        converged=mac_ok and pnc_ok,
    )


def trace_region(ch: TwrcInstance, jd: JointDecomposition,
                 s: OptimizerSettings,
                 indicator_all_streams: bool = False) -> RateRegion:
    """Boundary of the scheme's rate region via a weight sweep.

    Each swept ratio contributes both corners of its cell's combined
    pentagon (both are achievable with the same resources); the hull is
    the time-sharing closure, clipped by the downlink rectangle.
    """
    pts = []
    for ratio in s.weight_sweep:
        w = WeightedObjective(w_A=ratio, w_B=1.0)
        sol = sd_optimize(ch, jd, w, s, indicator_all_streams)
        p = sol.pentagon
        ra2 = max(p.S_AB - p.S_B, 0.0)
        rb2 = max(p.S_AB - p.S_A, 0.0)
        pts.append([min(p.S_A, p.S_AB), rb2])
        pts.append([ra2, min(p.S_B, p.S_AB)])
    region = RateRegion.from_points(np.array(pts))
    dl = downlink_rates(ch, default_relay_covariance(ch.n_R, ch.power.P_R))
    return region.clipped(dl.R_A, dl.R_B)
