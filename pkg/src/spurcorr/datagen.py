"""Samplers for the simulation designs: covariance models, noise laws, sparse models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngStream, chol_spd
from .errors import InvalidModel

# Seeds for the fixed design matrices (orthogonal bases below). They are
# construction constants, deliberately independent of any sampling stream, so
# a covariance model is the same object in every run.
_ANISO_BASIS_SEED = 0x5C0FFEE
_LOWRANK_BASIS_SEED = 0x10A4A1


def _random_orthogonal(dim: int, cols: int, seed: int) -> np.ndarray:
    """Q factor of a seeded Gaussian matrix, sign-fixed for determinism."""
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(dim, cols))))
    q, r = np.linalg.qr(g.standard_normal((dim, cols)))
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class CovarianceModel:
    """One of the supported covariate-covariance designs.

    kind:
      * ``identity``: isotropic, parameters ``p``.
      * ``block_equicorr``: leading ``block_size`` x ``block_size`` block with
        constant correlation ``rho``, identity elsewhere.
      * ``anisotropic``: ten latent factors mixed into all coordinates; the
        factor covariance is a seeded correlation matrix with condition
        number ``cond_number``, coupling strength ``rho``; unit diagonal.
      * ``lowrank``: rows live in the column space of a fixed p x r matrix
        with orthonormal columns.
    """

    kind: str
    p: int
    block_size: int | None = None
    rho: float | None = None
    cond_number: float | None = None
    r: int | None = None

    def __post_init__(self):
        if self.p < 1:
            raise InvalidModel("p must be >= 1")
        if self.kind == "identity":
            return
        if self.kind == "block_equicorr":
            b, rho = self.block_size, self.rho
            if b is None or rho is None:
                raise InvalidModel("block_equicorr needs block_size and rho")
            if b < 1 or b > self.p:
                raise InvalidModel(f"block_size {b} outside [1, p={self.p}]")
            lo = -1.0 / (b - 1) if b > 1 else -1.0
            if not (lo < rho < 1.0):
                raise InvalidModel(f"rho={rho} outside ({lo:.4g}, 1) for block_size={b}")
            return
        if self.kind == "anisotropic":
            if self.cond_number is None or self.rho is None:
                raise InvalidModel("anisotropic needs cond_number and rho")
            if self.cond_number < 1.0:
                raise InvalidModel("cond_number must be >= 1")
            if not (0.0 < self.rho < 1.0):
                raise InvalidModel("anisotropic rho must lie in (0, 1)")
            if self.p < 21:
                raise InvalidModel("anisotropic design needs p >= 21")
            return
        if self.kind == "lowrank":
            if self.r is None or not (1 <= self.r <= self.p):
                raise InvalidModel("lowrank needs 1 <= r <= p")
            return
        raise InvalidModel(f"unknown covariance kind {self.kind!r}")

    # -- materialization ---------------------------------------------------

    def factor_matrix(self) -> np.ndarray:
        """The fixed p x r orthonormal-column matrix of the lowrank design."""
        if self.kind != "lowrank":
            raise InvalidModel("factor_matrix is defined for the lowrank kind only")
        return _random_orthogonal(self.p, self.r, _LOWRANK_BASIS_SEED)

    def materialize(self) -> np.ndarray:
        """Dense population covariance matrix (a correlation matrix for the
        dense kinds; rank-r Gram of the factor matrix for lowrank)."""
        p = self.p
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "block_equicorr":
            sigma = np.eye(p)
            b, rho = self.block_size, self.rho
            sigma[:b, :b] = (1.0 - rho) * np.eye(b) + rho * np.ones((b, b))
            return sigma
        if self.kind == "anisotropic":
            g1, g2_diag, factor_cov = self._anisotropic_parts()
            sigma = g1 @ factor_cov @ g1.T
            sigma[np.diag_indices(p)] += g2_diag
            return sigma
        # lowrank
        gamma = self.factor_matrix()
        return gamma @ gamma.T

    def _anisotropic_parts(self):
        """Mixing matrix for the latent block, the (diagonal) independent
        part of the covariance, and the latent-block correlation matrix."""
        p, rho, cond = self.p, self.rho, self.cond_number
        q = _random_orthogonal(10, 10, _ANISO_BASIS_SEED)
        a = (q * np.linspace(1.0, cond, 10)) @ q.T
        scale = 1.0 / np.sqrt(np.diag(a))
        factor_cov = a * np.outer(scale, scale)  # unit diagonal

        c_mid = rho / np.sqrt(1.0 + rho**2)
        c_tail = (1.0 - rho) / np.sqrt(1.0 + (1.0 - rho) ** 2)
        g1 = np.zeros((p, 10))
        g1[:10, :] = np.eye(10)
        g1[10:20, :] = c_mid * np.eye(10)
        g1[20:, 0] = c_tail

        g2_diag = np.zeros(p)
        g2_diag[10:20] = 1.0 / (1.0 + rho**2)
        g2_diag[20:] = 1.0 / (1.0 + (1.0 - rho) ** 2)
        return g1, g2_diag, factor_cov

    def check_valid(self) -> None:
        """Verify the materialized model: unit diagonal and SPD for the dense
        kinds (via Cholesky success), orthonormal columns for lowrank."""
        if self.kind == "lowrank":
            gamma = self.factor_matrix()
            gram = gamma.T @ gamma
            if np.max(np.abs(gram - np.eye(self.r))) > 1e-10:
                raise InvalidModel("lowrank factor columns are not orthonormal")
            return
        sigma = self.materialize()
        if np.max(np.abs(np.diag(sigma) - 1.0)) > 1e-12:
            raise InvalidModel(f"{self.kind} covariance does not have unit diagonal")
        chol_spd(sigma)  # raises SingularGram if not SPD


def identity_model(p: int) -> CovarianceModel:
    return CovarianceModel(kind="identity", p=p)


def block_equicorr_model(p: int, block_size: int, rho: float) -> CovarianceModel:
    return CovarianceModel(kind="block_equicorr", p=p, block_size=block_size, rho=rho)


def anisotropic_model(p: int, cond_number: float = 5.0, rho: float = 0.8) -> CovarianceModel:
    return CovarianceModel(kind="anisotropic", p=p, cond_number=cond_number, rho=rho)


def lowrank_model(p: int, r: int) -> CovarianceModel:
    return CovarianceModel(kind="lowrank", p=p, r=r)


def scenario_model(name: str, p: int, r: int | None = None) -> CovarianceModel:
    """Named presets addressable from the CLI.

    ``block`` uses a leading p//2 block with correlation 0.8; ``anisotropic``
    uses condition number 5 and rho 0.8; ``lowrank`` requires r.
    """
    name = name.lower()
    if name == "isotropic":
        return identity_model(p)
    if name == "block":
        return block_equicorr_model(p, max(1, p // 2), 0.8)
    if name == "anisotropic":
        return anisotropic_model(p)
    if name == "lowrank":
        if r is None:
            raise InvalidModel("lowrank scenario needs r")
        return lowrank_model(p, r)
    raise InvalidModel(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Unit-variance noise law: gaussian, uniform_standardized, laplace_standardized."""

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_standardized", "laplace_standardized"):
            raise InvalidModel(f"unknown noise kind {self.kind!r}")

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        gen = rng.generator()
        if self.kind == "gaussian":
            return gen.standard_normal(n)
        if self.kind == "uniform_standardized":
            return np.sqrt(12.0) * (gen.random(n) - 0.5)
        # laplace with scale 1/sqrt(2) has variance exactly 1
        return gen.laplace(loc=0.0, scale=1.0 / np.sqrt(2.0), size=n)


@dataclass(frozen=True)
class LinearModelSpec:
    """Sparse linear model: coefficients, covariate design, noise law."""

    beta: np.ndarray
    cov: CovarianceModel
    noise: NoiseModel = NoiseModel()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if beta.shape[0] != self.cov.p:
            raise InvalidModel("beta length must equal cov.p")
        object.__setattr__(self, "beta", beta)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.nonzero(self.beta)[0])


def sdp_beta(p: int) -> np.ndarray:
    """The alternating sparse coefficient vector (1, 0, -0.8, 0, 0.6, 0, -0.4, 0, ..., 0)."""
    if p < 7:
        raise InvalidModel("sdp beta needs p >= 7")
    beta = np.zeros(p)
    beta[0], beta[2], beta[4], beta[6] = 1.0, -0.8, 0.6, -0.4
    return beta


def sample_covariates(model: CovarianceModel, n: int, rng: RngStream) -> Dataset:
    """Draw n i.i.d. mean-zero rows with the model's population covariance.

    Dense kinds sample through the Cholesky factor of the materialized
    covariance (identity short-circuits); lowrank maps r-dimensional
    Gaussians through the fixed orthonormal factor, so rows have rank <= r.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    gen = rng.generator()
    if model.kind == "identity":
        x = gen.standard_normal((n, model.p))
    elif model.kind == "lowrank":
        gamma = model.factor_matrix()
        x = gen.standard_normal((n, model.r)) @ gamma.T
    else:
        sigma = model.materialize()
        lower = chol_spd(sigma)
        x = gen.standard_normal((n, model.p)) @ lower.T
    return Dataset(x=x)


def sample_linear_model(
    spec: LinearModelSpec,
    n: int,
    rng: RngStream,
    noise_scale: float = 1.0,
) -> Dataset:
    """Draw (X, y) with y = X beta + noise.

    Covariates and noise come from disjoint substreams of ``rng``.
    ``noise_scale`` is a test hook; 0 produces a noiseless response.
    """
    d = sample_covariates(spec.cov, n, rng.child("covariates"))
    eps = spec.noise.sample(n, rng.child("noise"))
    y = d.x @ spec.beta + noise_scale * eps
    return d.with_y(y)
