"""Randomized self-checks of the library's core invariants.

Each check draws its own inputs from a seeded generator and returns a
pass/fail verdict with a short detail string, so the whole suite is
reproducible and operable from the command line.
"""

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import montecarlo as mc
from . import serialization as ser
from .linalg import degree_of_orthogonality, joint_decompose
from .optimize import OptimizerSettings, trace_region
from .rates import PowerConfig, TwrcInstance, pnc_rate_simo
from .spectrum import (
    aed,
    asymptotic_gap,
    normalized_gap,
    optimal_l_prime,
    planted_channel_pair,
    support_edge,
    symmetric_normalized_gap,
)

__all__ = ["CheckResult", "run_all", "CHECK_NAMES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _cplx(rng, rows, cols):
    return (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def _check_decomposition(rng):
    worst = 0.0
    for _ in range(25):
        n_R = int(rng.integers(2, 7))
        n_A = int(rng.integers(1, n_R + 1))
        n_B = int(rng.integers(1, n_R + 1))
        H_A, H_B = _cplx(rng, n_R, n_A), _cplx(rng, n_R, n_B)
        jd = joint_decompose(H_A, H_B)
        errs = [
            np.linalg.norm(jd.U @ jd.D_A @ jd.G_A - H_A),
            np.linalg.norm(jd.U @ jd.D_B @ jd.G_B - H_B),
            np.linalg.norm(jd.U.conj().T @ jd.U - np.eye(jd.U.shape[1])),
        ]
        if jd.k + jd.l + jd.d_A != n_A or jd.k + jd.l + jd.d_B != n_B:
            return False, f"block counts broke at shape ({n_A},{n_B},{n_R})"
        for i in range(jd.k + jd.l):
            expect = jd.lambdas[i] - 1.0
            errs.append(abs(degree_of_orthogonality(jd, i + 1) - expect))
        worst = max(worst, max(errs))
    return worst < 1e-8, f"worst residual {worst:.2e}"


def _check_rates(rng):
    for _ in range(40):
        n_R = int(rng.integers(1, 6))
        h_a, h_b = _cplx(rng, n_R, 1)[:, 0], _cplx(rng, n_R, 1)[:, 0]
        p = h_a / np.linalg.norm(h_a)
        prev_basic = prev_mmse = -1.0
        for P in (0.5, 2.0, 8.0, 32.0):
            basic = pnc_rate_simo(p, h_a, h_b, P, P, 1.0, mmse=False)
            lifted = pnc_rate_simo(p, h_a, h_b, P, P, 1.0, mmse=True)
            if lifted.R_A < basic.R_A - 1e-12 or lifted.R_B < basic.R_B - 1e-12:
                return False, "lattice lift fell below the basic rate"
            if basic.sum_rate < prev_basic - 1e-12 or lifted.sum_rate < prev_mmse - 1e-12:
                return False, "rate decreased as power grew"
            prev_basic, prev_mmse = basic.sum_rate, lifted.sum_rate
    return True, "projection rates monotone, lifted >= basic"


def _check_ordering(rng):
    fracs = np.linspace(0.0, 1.0, 11)
    for shape in ((2, 2, 4), (1, 2, 3)):
        for _ in range(8):
            inst = mc.rayleigh_sample(*shape, int(rng.integers(0, 2**63)))
            prep = mc._TrialPrep(inst, mc.SCHEMES)
            for P in (10.0, 10.0**2.5):
                v = {s: mc._eval_scheme(s, prep, P, fracs, 500)
                     for s in mc.SCHEMES}
                ok = (
                    v["upper_bound"] >= v["sd"] - 1e-9
                    and v["sd"] >= v["gsvd_pnc"] - 1e-9
                    and v["sd"] >= v["complete_decoding"] - 1e-9
                )
                if not ok:
                    return False, f"ordering broke at {shape}, P={P:g}: {v}"
    return True, "upper_bound >= sd >= both baselines"


def _check_spectrum(rng):
    for _ in range(3):
        ea, eb = float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.1, 1.0))
        spec = aed(ea, eb)
        if abs(spec.total_mass() - 1.0) > 1e-6:
            return False, f"mass off at ({ea:.3f},{eb:.3f})"
        if abs(spec.mean() - (ea + eb)) > 1e-6:
            return False, f"mean off at ({ea:.3f},{eb:.3f})"
    for _ in range(20):
        lam = np.sort(rng.uniform(1.0 + 1e-6, 2.0 - 1e-6, int(rng.integers(1, 6))))[::-1]
        k = int(rng.integers(0, 2))
        lams = np.concatenate([np.full(k, 2.0), lam])
        best = min(range(len(lam) + 1),
                   key=lambda lp: asymptotic_gap(lams, k, lp))
        got = optimal_l_prime(lams, k)
        if abs(asymptotic_gap(lams, k, got) - asymptotic_gap(lams, k, best)) > 1e-12:
            return False, "split rule missed the brute-force optimum"
        if asymptotic_gap(lams, k, got) < -1e-15:
            return False, "negative gap"
    lo = symmetric_normalized_gap(0.1, branch="low")
    hi = symmetric_normalized_gap(0.1, branch="high")
    if abs(lo - hi) > 1e-6 or support_edge(0.1) != 1.6:
        return False, "branch crossover mismatch at load 1/10"
    if abs(normalized_gap(0.5, 0.5) - 0.053) > 1e-3:
        return False, "symmetric-load constant off"
    return True, "mass/mean, split rule, branch crossover all hold"


def _check_planted(rng):
    lam = np.array([1.9, 1.6, 1.25])
    H_A, H_B = planted_channel_pair(lam, 8, rng, k=1, d_A=1)
    jd = joint_decompose(H_A, H_B)
    if (jd.k, jd.l, jd.d_A, jd.d_B) != (1, 3, 1, 0):
        return False, f"planted blocks misread: {(jd.k, jd.l, jd.d_A, jd.d_B)}"
    err = float(np.max(np.abs(jd.lambdas[1:4] - lam)))
    return err < 1e-8, f"planted eigenvalue error {err:.2e}"


def _check_serialization(rng):
    with tempfile.TemporaryDirectory() as d:
        M = _cplx(rng, 3, 4)
        p = os.path.join(d, "m.json")
        ser.save_matrix(p, M)
        if not np.array_equal(ser.load_matrix(p), M):
            return False, "matrix round-trip not bit-identical"
        rows = [("sd", 12.5, 2, 2, 4, rng.uniform(), rng.uniform(), 7, 3)]
        c = os.path.join(d, "t.csv")
        ser.write_csv(c, mc.SWEEP_COLUMNS, rows)
        back = ser.read_sweep_csv(c)
        if back != [tuple(rows[0])]:
            return False, "sweep table round-trip changed values"
    return True, "JSON matrices and CSV tables round-trip exactly"


def _check_determinism(rng):
    sc = mc.Scenario(n_A=2, n_B=2, n_R=4, snr_db_list=(5.0, 20.0),
                     trials=3, seed=int(rng.integers(0, 2**63)))
    r1 = list(mc.run_scenario(sc).rows())
    r2 = list(mc.run_scenario(sc).rows())
    return r1 == r2, "repeated runs byte-identical" if r1 == r2 else "runs differ"


def _check_region(rng):
    P = 10.0 ** 2.0
    inst = mc.rayleigh_sample(2, 2, 3, int(rng.integers(0, 2**63)),
                              PowerConfig(P, P, P, 1.0))
    jd = joint_decompose(inst.H_AR, inst.H_BR)
    region = trace_region(inst, jd, OptimizerSettings())
    v = region.vertices
    for i in range(len(v)):
        mid = 0.5 * (v[i] + v[(i + 1) % len(v)])
        if not region.contains(mid[0], mid[1]):
            return False, f"midpoint {mid} escaped the hull"
    return True, f"hull with {len(v)} vertices is convex"


_CHECKS = (
    ("decomposition", _check_decomposition),
    ("rate-monotonicity", _check_rates),
    ("scheme-ordering", _check_ordering),
    ("limit-spectrum", _check_spectrum),
    ("planted-spectrum", _check_planted),
    ("serialization", _check_serialization),
    ("determinism", _check_determinism),
    ("region-convexity", _check_region),
)

CHECK_NAMES = tuple(name for name, _ in _CHECKS)


def run_all(seed: int = 0):
    results = []
    for idx, (name, fn) in enumerate(_CHECKS):
        rng = np.random.Generator(np.random.PCG64(mc.splitmix64(seed, idx)))
        try:
            passed, detail = fn(rng)
        except Exception as e:  # a crash is a failure, not an abort
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail))
    return results
