import numpy as np
import pytest

from spurcorr.core import Dataset


def make_orthonormal_design(n: int, p: int, seed: int = 0) -> Dataset:
    """Centered columns with (1/n) X'X = I exactly (up to round-off).

    QR of a centered random matrix gives orthonormal columns inside the
    centered hyperplane; scaling by sqrt(n) makes the 1/n-Gram the identity.
    """
    assert p <= n - 1
    g = np.random.default_rng(seed)
    raw = g.standard_normal((n, p))
    raw -= raw.mean(axis=0)
    q, _ = np.linalg.qr(raw)
    return Dataset(x=np.sqrt(n) * q[:, :p])


def projection_sq_norm(xc: np.ndarray, idx, eps_c: np.ndarray) -> float:
    """||P_S eps||^2 via least squares: independent check of the Gram route."""
    cols = xc[:, list(idx)]
    coef, *_ = np.linalg.lstsq(cols, eps_c, rcond=None)
    fit = cols @ coef
    return float(fit @ fit)


@pytest.fixture
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
