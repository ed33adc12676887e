"""Dense symmetric linear algebra and moment estimation.

This module owns the three primitives every estimator in the package is built
from: sample moments of a returns panel, inversion of symmetric positive
definite matrices via Cholesky, and the budget-constrained precision matrix

    Q = S^{-1} - S^{-1} 1 1' S^{-1} / (1' S^{-1} 1),

which annihilates the constant vector and drives every frontier quantity.
All functions are pure; returned arrays are fresh and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .config import TOL
from .errors import NotPositiveDefinite

__all__ = [
    "ReturnMatrix",
    "MomentEstimates",
    "PrecisionBundle",
    "sample_moments",
    "invert_spd",
    "q_matrix",
    "precision_bundle",
    "cholesky_spd",
    "symmetrize",
]


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average a matrix with its transpose to remove round-off drift."""
    return 0.5 * (m + m.T)


def _check_symmetric(m: np.ndarray, rel: float, what: str) -> None:
    scale = float(np.abs(m).max()) or 1.0
    gap = float(np.abs(m - m.T).max())
    if gap > rel * scale:
        raise ValueError(f"{what} is not symmetric: max asymmetry {gap:.3e} "
                         f"exceeds {rel:.1e} relative")


@dataclass(frozen=True)
class ReturnMatrix:
    """A p-by-n panel of per-period returns, columns indexed by time.

    Requires at least two assets and two observations, all entries finite.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("return panel must be two-dimensional (assets x time)")
        p, n = data.shape
        if p < 2 or n < 2:
            raise ValueError(f"need p >= 2 assets and n >= 2 observations, got p={p}, n={n}")
        if not np.all(np.isfinite(data)):
            raise ValueError("return panel contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MomentEstimates:
    """Sample mean, sample covariance (divisor n-1) and the dimension ratio."""

    mean: np.ndarray
    cov: np.ndarray
    p: int
    n: int
    c_n: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a vector and cov a matching square matrix")
        if mean.size != self.p:
            raise ValueError("declared p does not match the mean vector length")
        if self.n < 2:
            raise ValueError("need n >= 2 observations")
        if self.c_n != self.p / self.n:
            raise ValueError("c_n must equal p/n exactly")
        _check_symmetric(cov, TOL.symmetry_rel, "sample covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class PrecisionBundle:
    """A precision matrix together with its budget-constrained projection.

    ``q @ ones`` must vanish and ``ones_quadform`` (the quadratic form of the
    all-ones vector in the precision metric) must be positive.
    """

    precision: np.ndarray
    q: np.ndarray
    ones_quadform: float

    def __post_init__(self) -> None:
        precision = np.asarray(self.precision, dtype=np.float64)
        q = np.asarray(self.q, dtype=np.float64)
        if self.ones_quadform <= 0.0:
            raise ValueError("ones_quadform must be positive")
        _check_symmetric(q, TOL.statistic_symmetry_rel, "projected precision")
        qnorm = float(np.linalg.norm(q)) or 1.0
        drift = float(np.abs(q @ np.ones(q.shape[0])).max())
        if drift > TOL.projection_rel * qnorm:
            raise ValueError(f"q does not annihilate the ones vector: residual {drift:.3e}")
        object.__setattr__(self, "precision", precision)
        object.__setattr__(self, "q", q)

    @property
    def p(self) -> int:
        return self.precision.shape[0]


def sample_moments(x: ReturnMatrix | np.ndarray) -> MomentEstimates:
    """Compute the sample mean and covariance of a p-by-n returns panel.

    The covariance uses the n-1 divisor and is explicitly symmetrized.
    Accepts either a :class:`ReturnMatrix` or a plain array (which may have a
    single row, useful for scalar sanity checks).
    """
    data = x.data if isinstance(x, ReturnMatrix) else np.atleast_2d(np.asarray(x, dtype=np.float64))
    if data.ndim != 2:
        raise ValueError("expected a two-dimensional assets-by-time panel")
    p, n = data.shape
    if n < 2:
        raise ValueError(f"need at least two observations, got n={n}")
    if not np.all(np.isfinite(data)):
        raise ValueError("return panel contains non-finite entries")
    mean = data.mean(axis=1)
    centered = data - mean[:, None]
    cov = symmetrize(centered @ centered.T / (n - 1))
    return MomentEstimates(mean=mean, cov=cov, p=p, n=n, c_n=p / n)


def cholesky_spd(m: np.ndarray, what: str = "matrix"):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises :class:`NotPositiveDefinite` when the factorization breaks down,
    which is the natural detector for singular sample covariances (n <= p).
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square")
    try:
        return sla.cho_factor(a, lower=True, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(f"{what} is not positive definite: {exc}") from exc


def invert_spd(m: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive definite matrix through its Cholesky factor.

    The input must be symmetric; the result is symmetrized before returning.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    _check_symmetric(a, TOL.statistic_symmetry_rel, "matrix to invert")
    factor = cholesky_spd(symmetrize(a))
    inv = sla.cho_solve(factor, np.eye(a.shape[0]))
    return symmetrize(inv)


def q_matrix(precision: np.ndarray, ones_quadform: float) -> np.ndarray:
    """Project a precision matrix onto the budget-constraint null space.

    Returns ``precision - (precision @ 1)(precision @ 1)' / ones_quadform``,
    the rank-one correction that makes the result annihilate constants.
    """
    if ones_quadform <= 0.0:
        raise ValueError("ones_quadform must be positive")
    prec = np.asarray(precision, dtype=np.float64)
    v = prec @ np.ones(prec.shape[0])
    return symmetrize(prec - np.outer(v, v) / ones_quadform)


def precision_bundle(cov: np.ndarray) -> PrecisionBundle:
    """Build the precision matrix, its projection and the ones quadratic form."""
    prec = invert_spd(cov)
    ones = np.ones(prec.shape[0])
    quad = float(ones @ prec @ ones)
    if quad <= 0.0:
        raise NotPositiveDefinite("ones quadratic form of the precision is not positive")
    return PrecisionBundle(precision=prec, q=q_matrix(prec, quad), ones_quadform=quad)
