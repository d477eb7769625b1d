"""Analytic limit laws for extreme spurious correlations.

For isotropic covariates, ``n * max_corr^2`` behaves like the sum of the top
s squared order statistics of p independent standard normals, centered by
``s * (2 log p - log log p)``. For s = 1 the limit is the Gumbel-type law

    G(t) = exp(-exp(-t/2) / sqrt(pi)),

and for fixed s >= 2 the limit CDF is a one-dimensional integral whose inner
kernel is a (regularized) lower incomplete gamma function. Both the analytic
CDFs and a finite-p Monte Carlo sampler of the pre-limit statistic live here,
each serving as the other's cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, factorial, lgamma, log, sqrt, pi

import numpy as np
from scipy import integrate

from .core import RngStream
from .errors import InvalidP, QuadratureFailure

SQRT_PI = sqrt(pi)
#: Quadrature truncates where the Gumbel-type CDF falls below this.
_LEFT_TAIL_CUT = 1e-12
_QUAD_TARGET = 1e-6
_QUAD_FAIL = 1e-5


def gumbel_like_cdf(t: float) -> float:
    """CDF of the s = 1 limit: exp(-exp(-t/2)/sqrt(pi))."""
    return exp(-exp(-t / 2.0) / SQRT_PI)


def gumbel_like_density(t: float) -> float:
    """Density of the s = 1 limit (derivative of the CDF)."""
    return exp(-t / 2.0) / (2.0 * SQRT_PI) * gumbel_like_cdf(t)


def max_chisq_centering(p: int) -> float:
    """Centering constant 2 log p - log log p for the max of p squared normals."""
    if int(p) != p or p < 3:
        raise InvalidP(f"need integer p >= 3, got {p!r}")
    return 2.0 * log(p) - log(log(p))


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x).

    Series expansion for x < a + 1, continued fraction for the complement
    otherwise (the standard split), both iterated to double precision.
    """
    if a <= 0:
        raise ValueError("shape a must be positive")
    if x <= 0.0:
        return 0.0
    lg = lgamma(a)
    if x < a + 1.0:
        # series: P(a,x) = x^a e^-x / Gamma(a+1) * sum_k x^k / (a+1)...(a+k)
        term = 1.0 / a
        total = term
        ak = a
        for _ in range(500):
            ak += 1.0
            term *= x / ak
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        else:  # pragma: no cover
            raise QuadratureFailure("incomplete gamma series did not converge")
        return total * exp(-x + a * log(x) - lg)
    # Lentz continued fraction for Q(a,x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover
        raise QuadratureFailure("incomplete gamma continued fraction did not converge")
    q = exp(-x + a * log(x) - lg) * h
    return 1.0 - q


def top_chisq_sum_cdf(t: float, s: int) -> float:
    """Limit CDF of the centered sum of the top s squared-normal order stats.

    Valid for fixed s >= 2 (use :func:`gumbel_like_cdf` for s = 1). Absolute
    quadrature error target 1e-6; raises :class:`QuadratureFailure` if the
    adaptive scheme cannot certify 1e-5.
    """
    if int(s) != s or s < 2:
        raise ValueError("s must be an integer >= 2")
    s = int(s)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    v_lo = -2.0 * log(SQRT_PI * log(1.0 / _LEFT_TAIL_CUT))
    hi = t / s
    if hi <= v_lo:
        return 0.0
    shape = s - 1

    def integrand(v: float) -> float:
        return (
            reg_lower_gamma(shape, (t - s * v) / 2.0)
            * exp(-(s - 1) * v / 2.0)
            * gumbel_like_density(v)
        )

    val, err = integrate.quad(integrand, v_lo, hi, epsabs=1e-9, epsrel=1e-10, limit=300)
    pref = pi ** ((1 - s) / 2.0) / factorial(s - 1)
    if err * pref > _QUAD_FAIL:
        raise QuadratureFailure(f"quadrature error {err * pref:.2e} above {_QUAD_FAIL}")
    return float(min(max(pref * val, 0.0), 1.0))


@dataclass(frozen=True)
class LimitLaw:
    """Limit CDF of the centered statistic for one subset size."""

    s: int

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("s must be an integer >= 1")

    def cdf(self, t: float) -> float:
        if self.s == 1:
            return gumbel_like_cdf(t)
        return top_chisq_sum_cdf(t, self.s)


def top_chisq_sum_sampler(
    p: int,
    s: int,
    reps: int,
    rng: RngStream,
    z_values: np.ndarray | None = None,
) -> np.ndarray:
    """Finite-p draws of (top-s sum of squared normals) - s * centering.

    Each replicate draws its own substream ("draw", i) so the vector is
    reproducible independent of chunking. The top s squares are found by
    partial selection, not a full sort. ``z_values`` (reps x p) is a testing
    hook replacing the normal draws.
    """
    if not 1 <= s <= p:
        raise ValueError(f"s={s} outside [1, p={p}]")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    a_p = max_chisq_centering(p)
    out = np.empty(reps)
    if z_values is not None:
        z_values = np.asarray(z_values, dtype=np.float64)
        if z_values.shape != (reps, p):
            raise ValueError("z_values must have shape (reps, p)")
    for i in range(reps):
        if z_values is not None:
            z = z_values[i]
        else:
            z = rng.child("draw", i).generator().standard_normal(p)
        sq = z * z
        if s == p:
            top = sq
        else:
            top = np.partition(sq, p - s)[p - s :]
        out[i] = float(np.sum(top)) - s * a_p
    return out


def gumbel_test_statistic(t_max: float, p: int) -> float:
    """Renormalized max-correlation statistic: t_max^2 minus the centering."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    return float(t_max) ** 2 - max_chisq_centering(p)


def gumbel_critical_value(alpha: float) -> float:
    """Rejection threshold at level alpha under the Gumbel-type null."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return -2.0 * log(-SQRT_PI * log(1.0 - alpha))


def gumbel_pvalue(j: float) -> float:
    """Upper-tail p-value of the observed renormalized statistic."""
    if not np.isfinite(j):
        raise ValueError("statistic must be finite")
    return 1.0 - gumbel_like_cdf(j)
