"""Closed-form projection directions for the relay's signal combining.

Shared by the rate engine (block pipeline, region tracing) and the
public optimizer API.  The weighted log objective over unit directions
is solved on the real embedding [Re; Im] of the channel vectors; the
mixing coefficient beta below is the closed-form stationary point.
"""

import numpy as np

from .errors import DegenerateChannel

_EPS = 1e-12


def beta(x: float, r: float) -> float:
    """Mixing weight for the second channel direction.

    ``x`` is the normalized real inner product of the two embedded
    channels, ``r`` the weight ratio w_B/w_A.  Positive root of
    beta^2 + x(1-r) beta - r = 0 when x >= 0, mirrored otherwise;
    sign(0) is taken as +1 so orthogonal channels mix with +sqrt(r).
    The root choice keeps beta(x, 1/r) = 1/beta(x, r), which makes
    swapping the users mirror the traced region.
    """
    s = 1.0 if x >= 0.0 else -1.0
    t = x * (1.0 - r)
    return 0.5 * (s * np.sqrt(t * t + 4.0 * r) - t)


def embed(h: np.ndarray) -> np.ndarray:
    """Stack real and imaginary parts into one real vector."""
    h = np.asarray(h, dtype=np.complex128).ravel()
    return np.concatenate([h.real, h.imag])


def unembed(pt: np.ndarray) -> np.ndarray:
    n = pt.shape[0] // 2
    return pt[:n] + 1j * pt[n:]


def optimal_direction(h_A, h_B, w_A: float, w_B: float) -> np.ndarray:
    """Unit complex combining vector maximizing the weighted log gains.

    Zero-weight edges align with the other user's channel outright; the
    general case mixes the normalized embedded channels with ``beta``.
    """
    ha = np.asarray(h_A, dtype=np.complex128).ravel()
    hb = np.asarray(h_B, dtype=np.complex128).ravel()
    na, nb = np.linalg.norm(ha), np.linalg.norm(hb)
    if na < _EPS or nb < _EPS:
        raise DegenerateChannel("projection undefined for a vanishing channel")
    if w_A < 0 or w_B < 0 or w_A + w_B <= 0:
        raise ValueError("weights must be nonnegative and not both zero")
    if w_A == 0.0:
        return hb / nb
    if w_B == 0.0:
        return ha / na
    ea = embed(ha) / na
    eb = embed(hb) / nb
    x = float(ea @ eb)
    pt = ea + beta(x, w_B / w_A) * eb
    nrm = np.linalg.norm(pt)
    if nrm < _EPS:
        raise DegenerateChannel("embedded channels cancel; direction undefined")
    return unembed(pt / nrm)


def pair_direction(lam: float, w_A: float, w_B: float) -> np.ndarray:
    """Unit real 2-vector combining one oblique direction pair.

    Specializes ``optimal_direction`` to the canonical pair columns
    [sqrt(lam/2), +/- sqrt((2-lam)/2)]; equal weights collapse to [1, 0].
    """
    if w_A == w_B:
        return np.array([1.0, 0.0])
    ea = np.array([np.sqrt(lam / 2.0), np.sqrt((2.0 - lam) / 2.0)])
    eb = np.array([np.sqrt(lam / 2.0), -np.sqrt((2.0 - lam) / 2.0)])
    if w_A == 0.0:
        return eb
    if w_B == 0.0:
        return ea
    x = float(ea @ eb)
    p = ea + beta(x, w_B / w_A) * eb
    return p / np.linalg.norm(p)
