"""Numerical substrate: datasets, seeded substreams, subset Gram kernels.

All containers are immutable after construction and all operations are pure,
so they are safe to share across threads; reproducibility is carried entirely
by :class:`RngStream` (seed + substream path).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularGram

#: Relative pivot threshold below which a subset Gram is declared singular.
SINGULAR_PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    """An n x p covariate matrix with an optional response vector.

    Parameters
    ----------
    x : ndarray, shape (n, p)
        Rows are observations, columns are covariates. Entries must be finite.
    y : ndarray, shape (n,), optional
        Response (or noise/residual) vector aligned with the rows of ``x``.
    column_names : tuple of str, optional
        Labels carried through to reports (populated from CSV headers).
    """

    x: np.ndarray
    y: np.ndarray | None = None
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        if x.ndim != 2:
            raise ValueError("x must be a 2-d array (observations x covariates)")
        n, p = x.shape
        if n < 2:
            raise ValueError(f"need at least 2 observations, got n={n}")
        if p < 1:
            raise ValueError("need at least one covariate column")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64)).reshape(-1)
            if y.shape[0] != n:
                raise ValueError(f"y has length {y.shape[0]}, expected n={n}")
            if not np.all(np.isfinite(y)):
                raise ValueError("y contains non-finite entries")
            object.__setattr__(self, "y", y)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != p:
                raise ValueError("column_names length must equal p")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def with_y(self, y: np.ndarray) -> "Dataset":
        return replace(self, y=y)


def _label_words(label) -> tuple[int, ...]:
    """Map one path label to 32-bit words for a SeedSequence spawn key.

    Integers map to themselves (split into 32-bit limbs); strings map to the
    first 8 bytes of their SHA-256, so distinct labels get distinct streams
    regardless of evaluation order.
    """
    if isinstance(label, (int, np.integer)):
        v = int(label)
        if v < 0:
            raise ValueError("path integers must be nonnegative")
        words = []
        while True:
            words.append(v & 0xFFFFFFFF)
            v >>= 32
            if v == 0:
                return tuple(words)
    if isinstance(label, str):
        dig = hashlib.sha256(label.encode("utf-8")).digest()[:8]
        return (
            int.from_bytes(dig[:4], "little"),
            int.from_bytes(dig[4:], "little"),
        )
    raise TypeError(f"path labels must be int or str, got {type(label)!r}")


@dataclass(frozen=True)
class RngStream:
    """A named, splittable random substream.

    ``(seed, path)`` fully determines the value sequence: substreams derived
    with :meth:`child` are statistically independent and reproducible no
    matter in which order (or on which thread) they are consumed.
    """

    seed: int
    path: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")

    def child(self, *labels) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(labels))

    def generator(self) -> np.random.Generator:
        spawn_key = tuple(w for lab in self.path for w in _label_words(lab))
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=spawn_key))
        )

    def describe(self) -> dict:
        """JSON-friendly descriptor sufficient to reproduce the stream."""
        return {"seed": int(self.seed), "path": list(self.path)}


def gaussian_vector(rng: RngStream, length: int) -> np.ndarray:
    """Draw ``length`` i.i.d. standard normal variates from the stream."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return rng.generator().standard_normal(length)


def center_columns(d: Dataset) -> Dataset:
    """Subtract column means from every covariate column (and from y)."""
    xc = d.x - d.x.mean(axis=0)
    yc = None if d.y is None else d.y - d.y.mean()
    return Dataset(x=xc, y=yc, column_names=d.column_names)


def chol_spd(a: np.ndarray, rtol: float = SINGULAR_PIVOT_RTOL) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix with pivot guarding.

    Raises :class:`SingularGram` as soon as a pivot falls below
    ``rtol * max(diag(a))``, which flags collinear/degenerate subsets before
    round-off turns them into garbage solves.
    """
    a = np.asarray(a, dtype=np.float64)
    m = a.shape[0]
    if a.shape != (m, m):
        raise ValueError("matrix must be square")
    diag = np.diag(a)
    if m == 0:
        return np.zeros((0, 0))
    tol = rtol * float(np.max(diag))
    lower = np.zeros_like(a)
    for k in range(m):
        pivot = a[k, k] - lower[k, :k] @ lower[k, :k]
        if not pivot > tol:
            raise SingularGram(
                f"Cholesky pivot {pivot:.3e} below tolerance {tol:.3e} at index {k}"
            )
        lkk = np.sqrt(pivot)
        lower[k, k] = lkk
        if k + 1 < m:
            lower[k + 1 :, k] = (a[k + 1 :, k] - lower[k + 1 :, :k] @ lower[k, :k]) / lkk
    return lower


def chol_spd_prefix(a: np.ndarray, rtol: float = SINGULAR_PIVOT_RTOL) -> int:
    """Length of the longest leading principal block with admissible pivots.

    Factors ``a`` in its given order and stops at the first pivot below
    ``rtol * max(diag(a))``; used to trim numerically dependent trailing
    picks off a forward-selection path.
    """
    a = np.asarray(a, dtype=np.float64)
    m = a.shape[0]
    if m == 0:
        return 0
    tol = rtol * float(np.max(np.diag(a)))
    lower = np.zeros_like(a)
    for k in range(m):
        pivot = a[k, k] - lower[k, :k] @ lower[k, :k]
        if not pivot > tol:
            return k
        lkk = np.sqrt(pivot)
        lower[k, k] = lkk
        if k + 1 < m:
            lower[k + 1 :, k] = (a[k + 1 :, k] - lower[k + 1 :, :k] @ lower[k, :k]) / lkk
    return m


@dataclass(frozen=True)
class GramCache:
    """Cholesky factorization of one centered subset Gram matrix.

    ``chol @ chol.T`` reconstructs ``(1/n) * Xc_S' Xc_S`` for the stored
    (strictly increasing) subset indices.
    """

    subset: tuple[int, ...]
    chol: np.ndarray
    logdet: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve Gram @ out = b via the cached factor."""
        from scipy.linalg import solve_triangular

        z = solve_triangular(self.chol, b, lower=True)
        return solve_triangular(self.chol.T, z, lower=False)

    def quad_form(self, v: np.ndarray) -> float:
        """v' Gram^{-1} v via one triangular solve."""
        from scipy.linalg import solve_triangular

        z = solve_triangular(self.chol, v, lower=True)
        return float(z @ z)


def subset_gram(d: Dataset, s_idx) -> GramCache:
    """Factor the centered Gram matrix of the covariate subset ``s_idx``.

    The Gram convention is ``(1/n) (X_S - mean)'(X_S - mean)``; indices must
    be strictly increasing. Raises :class:`SingularGram` for collinear
    subsets (pivot below ``1e-10`` of the largest diagonal entry).
    """
    idx = np.asarray(list(s_idx), dtype=np.intp)
    if idx.size == 0:
        raise ValueError("subset must be nonempty")
    if np.any(idx < 0) or np.any(idx >= d.p):
        raise ValueError("subset indices out of range")
    if idx.size > 1 and not np.all(np.diff(idx) > 0):
        raise ValueError("subset indices must be strictly increasing")
    cols = d.x[:, idx]
    cols = cols - cols.mean(axis=0)
    gram = (cols.T @ cols) / d.n
    lower = chol_spd(gram)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    return GramCache(subset=tuple(int(i) for i in idx), chol=lower, logdet=logdet)
