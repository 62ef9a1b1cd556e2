import numpy as np
import pytest

from twrc.rates import PowerConfig, TwrcInstance


def cplx(rng, rows, cols):
    return (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def instance(rng, n_A, n_B, n_R, P=10.0, N0=1.0):
    return TwrcInstance(
        H_AR=cplx(rng, n_R, n_A),
        H_BR=cplx(rng, n_R, n_B),
        H_RA=cplx(rng, n_A, n_R),
        H_RB=cplx(rng, n_B, n_R),
        power=PowerConfig(P_A=P, P_B=P, P_R=P, N0=N0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
