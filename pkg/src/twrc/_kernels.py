"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Every function in this module is written in nopython-compatible style
(plain arrays, scalars, loops) so that a single source serves both
backends.  The backend is chosen at import time:

* ``TWRC_BACKEND=numpy`` forces the uncompiled fallback;
* ``TWRC_BACKEND=numba`` (or unset, with numba importable) compiles each
  kernel with ``@njit(cache=True, nogil=True)``.

Both paths execute the same statements in the same order.  Single-pass
kernels produce bit-identical results; the iterative ones can differ in
the last bit or two because LLVM may contract multiply-adds that the
interpreter rounds separately.  Within one backend every result is
byte-reproducible.  ``nogil`` lets the Monte Carlo driver run trials on
a thread pool.
"""

import os

import numpy as np

_env = os.environ.get("TWRC_BACKEND", "").strip().lower()
if _env not in ("", "numba", "numpy"):
    raise RuntimeError("TWRC_BACKEND must be 'numba' or 'numpy', got %r" % _env)

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    njit = None

if _env == "numba" and not HAS_NUMBA:
    raise RuntimeError("TWRC_BACKEND=numba but numba is not importable")

USE_NUMBA = HAS_NUMBA and _env != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    # cache=True is safe here: kernels only call each other within this file
    def maybe_jit(f):
        return njit(cache=True, nogil=True)(f)
else:
    def maybe_jit(f):
        return f


@maybe_jit
def chol_logdet(K):
    """log-determinant (natural log) of a Hermitian PD matrix via Cholesky.

    Returns -inf if a pivot is nonpositive (matrix not PD).  The input is
    not modified.
    """
    n = K.shape[0]
    L = K.copy()
    acc = 0.0
    for j in range(n):
        d = L[j, j].real
        for k in range(j):
            d -= (L[j, k] * np.conj(L[j, k])).real
        if d <= 0.0:
            return -np.inf
        acc += np.log(d)
        ld = np.sqrt(d)
        L[j, j] = ld
        for i in range(j + 1, n):
            s = L[i, j]
            for k in range(j):
                s -= L[i, k] * np.conj(L[j, k])
            L[i, j] = s / ld
    return acc


@maybe_jit
def water_fill(gains, budget):
    """Classical water-filling: maximize sum log(1 + p_i g_i), sum p_i <= budget.

    Zero gains receive zero power.  Returns the allocation array (same
    order as ``gains``).
    """
    n = gains.shape[0]
    p = np.zeros(n)
    if budget <= 0.0:
        return p
    order = np.argsort(-gains)
    m_max = 0
    for i in range(n):
        if gains[order[i]] > 0.0:
            m_max += 1
    if m_max == 0:
        return p
    inv_acc = 0.0
    level = 0.0
    m_active = 0
    for m in range(1, m_max + 1):
        g = gains[order[m - 1]]
        inv_acc += 1.0 / g
        mu = (budget + inv_acc) / m
        if mu > 1.0 / g:
            level = mu
            m_active = m
    for i in range(m_active):
        p[order[i]] = level - 1.0 / gains[order[i]]
    return p


@maybe_jit
def _eigh_small(A):
    """Ascending eigendecomposition of a small Hermitian matrix.

    Closed form for n <= 2, LAPACK otherwise.  The n = 2 branch matters:
    it sits inside the iterative water-filling loop of the split search.
    """
    n = A.shape[0]
    if n == 1:
        w = np.empty(1)
        w[0] = A[0, 0].real
        V = np.ones((1, 1), dtype=np.complex128)
        return w, V
    if n == 2:
        a = A[0, 0].real
        c = A[1, 1].real
        b = A[0, 1]
        absb = np.abs(b)
        t = 0.5 * (a + c)
        r = np.sqrt(0.25 * (a - c) * (a - c) + absb * absb)
        w = np.empty(2)
        w[0] = t - r
        w[1] = t + r
        V = np.empty((2, 2), dtype=np.complex128)
        if absb < 1e-300:
            if a <= c:
                V[0, 0] = 1.0
                V[1, 0] = 0.0
                V[0, 1] = 0.0
                V[1, 1] = 1.0
            else:
                V[0, 0] = 0.0
                V[1, 0] = 1.0
                V[0, 1] = 1.0
                V[1, 1] = 0.0
            return w, V
        # eigenvector for w1 = t + r: (A - w1 I) v = 0 -> v = [b, w1 - a]
        v0 = b
        v1 = w[1] - a
        nv = np.sqrt((v0 * np.conj(v0)).real + v1 * v1)
        V[0, 1] = v0 / nv
        V[1, 1] = v1 / nv
        # orthogonal partner
        V[0, 0] = -np.conj(V[1, 1])
        V[1, 0] = np.conj(V[0, 1])
        return w, V
    return np.linalg.eigh(A)


@maybe_jit
def mac_sum_iwf(HA, HB, PA, PB, inv_n0, QA, QB, max_iters, tol):
    """Sum-rate-optimal MAC covariances by iterative water-filling.

    Maximizes 0.5*log2 det(I + (HA QA HA' + HB QB HB')*inv_n0) subject to
    trace budgets.  ``QA``/``QB`` are warm starts, updated in place.
    Returns the achieved sum rate in bits.
    """
    nr = HA.shape[0]
    na = HA.shape[1]
    nb = HB.shape[1]
    eye = np.eye(nr, dtype=np.complex128)
    prev = -1.0
    rate = 0.0
    for _ in range(max_iters):
        for user in range(2):
            if user == 0:
                H, Ho, Qo, P = HA, HB, QB, PA
                nm, no = na, nb
            else:
                H, Ho, Qo, P = HB, HA, QA, PB
                nm, no = nb, na
            if P <= 0.0 or nm == 0:
                continue
            K = eye.copy()
            if no > 0:
                K = K + inv_n0 * (Ho @ (Qo @ Ho.conj().T))
            X = np.linalg.solve(K, H)
            Aeff = inv_n0 * (H.conj().T @ X)
            Aeff = 0.5 * (Aeff + Aeff.conj().T)
            w, V = _eigh_small(Aeff)
            wc = np.maximum(w, 0.0)
            p = water_fill(wc, P)
            Q = (V * p.astype(np.complex128)) @ V.conj().T
            if user == 0:
                QA[:, :] = 0.5 * (Q + Q.conj().T)
            else:
                QB[:, :] = 0.5 * (Q + Q.conj().T)
        K = eye.copy()
        if na > 0:
            K = K + inv_n0 * (HA @ (QA @ HA.conj().T))
        if nb > 0:
            K = K + inv_n0 * (HB @ (QB @ HB.conj().T))
        rate = 0.5 * chol_logdet(K) / np.log(2.0)
        if rate - prev < tol:
            break
        prev = rate
    return rate


@maybe_jit
def pnc_pair_rates(s2A, s2B, rt2, psiA, psiB, inv_n0, indicator_all):
    """Per-user rates of the aligned-stream lattice decoder.

    ``s2m`` are squared diagonal gains per user, ``rt2`` the squared
    triangular diagonal, ``psi`` per-stream powers.  The self-ratio term
    applies to the first stream only unless ``indicator_all``; a zero
    denominator drops the term (its continuous limit).
    """
    n = s2A.shape[0]
    ra = 0.0
    rb = 0.0
    for i in range(n):
        den = s2A[i] * psiA[i] + s2B[i] * psiB[i]
        with_ind = indicator_all or i == 0
        ta = rt2[i] * s2A[i] * psiA[i] * inv_n0
        tb = rt2[i] * s2B[i] * psiB[i] * inv_n0
        if with_ind and den > 0.0:
            ta += s2A[i] * psiA[i] / den
            tb += s2B[i] * psiB[i] / den
        if ta > 1.0:
            ra += 0.5 * np.log2(ta)
        if tb > 1.0:
            rb += 0.5 * np.log2(tb)
    return ra, rb


@maybe_jit
def _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all):
    ra, rb = pnc_pair_rates(s2A, s2B, rt2, psiA, psiB, inv_n0, indicator_all)
    return wA * ra + wB * rb


@maybe_jit
def _line_scan(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all,
               user, i, j, lo, hi):
    """Best transfer delta in [lo, hi] moving power from stream i to j.

    Coarse scan then golden-section refinement; deterministic.
    """
    psi = psiA if user == 0 else psiB
    base_i = psi[i]
    base_j = psi[j]
    best_d = 0.0
    best_v = _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all)
    npts = 13
    for t in range(npts):
        d = lo + (hi - lo) * t / (npts - 1.0)
        psi[i] = base_i - d
        psi[j] = base_j + d
        v = _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all)
        if v > best_v:
            best_v = v
            best_d = d
    step = (hi - lo) / (npts - 1.0)
    a = best_d - step
    b = best_d + step
    if a < lo:
        a = lo
    if b > hi:
        b = hi
    gr = 0.6180339887498949
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    for _ in range(40):
        psi[i] = base_i - x1
        psi[j] = base_j + x1
        f1 = _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all)
        psi[i] = base_i - x2
        psi[j] = base_j + x2
        f2 = _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all)
        if f1 >= f2:
            b = x2
            x2 = x1
            x1 = b - gr * (b - a)
        else:
            a = x1
            x1 = x2
            x2 = a + gr * (b - a)
    d = 0.5 * (a + b)
    psi[i] = base_i - d
    psi[j] = base_j + d
    v = _pnc_objective(s2A, s2B, rt2, psiA, psiB, inv_n0, wA, wB, indicator_all)
    if v < best_v:
        psi[i] = base_i - best_d
        psi[j] = base_j + best_d
        return best_v
    return v


@maybe_jit
def _surrogate_alloc(c, budget):
    """High-SNR seed: equal power over the subset of streams worth activating.

    Maximizes sum over the active set of [log(c_i * budget/|set|)]^+, the
    interference-free surrogate whose stationary point equalizes power
    across active streams.
    """
    n = c.shape[0]
    psi = np.zeros(n)
    if budget <= 0.0 or n == 0:
        return psi
    order = np.argsort(-c)
    if c[order[0]] <= 0.0:
        return psi
    best_m = 1
    best_v = -np.inf
    for m in range(1, n + 1):
        if c[order[m - 1]] <= 0.0:
            break
        v = 0.0
        share = budget / m
        for i in range(m):
            t = c[order[i]] * share
            if t > 1.0:
                v += np.log2(t)
        if v > best_v:
            best_v = v
            best_m = m
    for i in range(best_m):
        psi[order[i]] = budget / best_m
    return psi


@maybe_jit
def pnc_allocate(s2A, s2B, rt2, budget_A, budget_B, inv_n0, wA, wB,
                 indicator_all, max_sweeps, tol):
    """Per-stream power allocation maximizing the weighted pair-rate sum.

    Multi-start (surrogate water-level, single best stream, uniform)
    followed by pairwise-transfer coordinate ascent with a slack stream
    that lets a user burn less than its budget (relevant when its
    first-stream power only feeds the other user's denominator).
    Returns (psiA, psiB, weighted objective).
    """
    n = s2A.shape[0]
    best_psiA = np.zeros(n)
    best_psiB = np.zeros(n)
    if n == 0:
        return best_psiA, best_psiB, 0.0, True
    best_v = -np.inf
    settled = True
    for start in range(3):
        psiA = np.zeros(n + 1)
        psiB = np.zeros(n + 1)
        if start == 0:
            psiA[:n] = _surrogate_alloc(rt2 * s2A * inv_n0, budget_A)
            psiB[:n] = _surrogate_alloc(rt2 * s2B * inv_n0, budget_B)
        elif start == 1:
            ia = np.argmax(rt2 * s2A)
            ib = np.argmax(rt2 * s2B)
            psiA[ia] = budget_A
            psiB[ib] = budget_B
        else:
            for i in range(n):
                psiA[i] = budget_A / n
                psiB[i] = budget_B / n
        psiA[n] = budget_A - np.sum(psiA[:n])
        psiB[n] = budget_B - np.sum(psiB[:n])
        # ascent over the extended vectors; index n is unspent (slack) power
        s2A_ext = np.zeros(n + 1)
        s2B_ext = np.zeros(n + 1)
        rt2_ext = np.zeros(n + 1)
        s2A_ext[:n] = s2A
        s2B_ext[:n] = s2B
        rt2_ext[:n] = rt2
        v = _pnc_objective(s2A_ext, s2B_ext, rt2_ext, psiA, psiB, inv_n0,
                           wA, wB, indicator_all)
        done = False
        for _ in range(max_sweeps):
            improved = v
            for user in range(2):
                psi = psiA if user == 0 else psiB
                for i in range(n + 1):
                    for j in range(i + 1, n + 1):
                        lo = -psi[j]
                        hi = psi[i]
                        if hi - lo <= 0.0:
                            continue
                        v = _line_scan(s2A_ext, s2B_ext, rt2_ext, psiA, psiB,
                                       inv_n0, wA, wB, indicator_all,
                                       user, i, j, lo, hi)
            if v - improved < tol:
                done = True
                break
        if v > best_v:
            best_v = v
            best_psiA[:] = psiA[:n]
            best_psiB[:] = psiB[:n]
            settled = done
    return best_psiA, best_psiB, best_v, settled


@maybe_jit
def sd_split_search(HcdA, HcdB, s2A, s2B, rt2, PA, PB, inv_n0, fracs,
                    iwf_iters, iwf_tol, pnc_sweeps, pnc_tol, indicator_all):
    """Best equal-weight uplink sum rate over the CD/PNC power-split grid.

    One decomposition cell: fixed split index, fixed factors.  ``HcdA/B``
    may have zero columns (pure network-coding cell) and ``s2A`` may be
    empty (pure complete-decoding cell); the grid collapses accordingly
    since wasting budget on an absent block is never optimal.
    """
    n_pnc = s2A.shape[0]
    na = HcdA.shape[1]
    nb = HcdB.shape[1]
    nf = fracs.shape[0]
    best = 0.0
    QA = np.zeros((na, na), dtype=np.complex128)
    QB = np.zeros((nb, nb), dtype=np.complex128)
    for ia in range(nf):
        fa = fracs[ia]
        # a fraction sent to an absent block is pure waste; keep one cell
        if na == 0 and ia > 0:
            break
        if n_pnc == 0 and ia < nf - 1:
            continue
        for ib in range(nf):
            fb = fracs[ib]
            if nb == 0 and ib > 0:
                break
            if n_pnc == 0 and ib < nf - 1:
                continue
            total = 0.0
            cdA = fa * PA if na > 0 else 0.0
            cdB = fb * PB if nb > 0 else 0.0
            if cdA > 0.0 or cdB > 0.0:
                QA[:, :] = 0.0
                QB[:, :] = 0.0
                for i in range(na):
                    QA[i, i] = cdA / na
                for i in range(nb):
                    QB[i, i] = cdB / nb
                total += mac_sum_iwf(HcdA, HcdB, cdA, cdB, inv_n0,
                                     QA, QB, iwf_iters, iwf_tol)
            if n_pnc > 0:
                bA = (1.0 - fa) * PA if na > 0 else PA
                bB = (1.0 - fb) * PB if nb > 0 else PB
                _, _, v, _ = pnc_allocate(s2A, s2B, rt2, bA, bB, inv_n0,
                                          1.0, 1.0, indicator_all,
                                          pnc_sweeps, pnc_tol)
                total += v
            if total > best:
                best = total
    return best


@maybe_jit
def ub_sum_waterfill(sv2A, sv2B, PA, PB, inv_n0):
    """Uplink sum of the per-user log-det bounds with water-filled inputs.

    ``sv2m`` are the squared singular values of the uplink channels.
    """
    total = 0.0
    for user in range(2):
        sv2 = sv2A if user == 0 else sv2B
        P = PA if user == 0 else PB
        g = sv2 * inv_n0
        p = water_fill(g, P)
        for i in range(g.shape[0]):
            total += 0.5 * np.log2(1.0 + p[i] * g[i])
    return total


@maybe_jit
def equal_power_sum_rate(HA, HB, PA, PB, inv_n0):
    """0.5*log2 det(I + (PA/nA HA HA' + PB/nB HB HB')*inv_n0)."""
    nr = HA.shape[0]
    K = np.eye(nr, dtype=np.complex128)
    if HA.shape[1] > 0 and PA > 0.0:
        K = K + (PA / HA.shape[1]) * inv_n0 * (HA @ HA.conj().T)
    if HB.shape[1] > 0 and PB > 0.0:
        K = K + (PB / HB.shape[1]) * inv_n0 * (HB @ HB.conj().T)
    return 0.5 * chol_logdet(K) / np.log(2.0)
