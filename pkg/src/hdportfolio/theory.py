"""Closed-form asymptotic oracles used to validate the estimators by simulation.

Everything here is deterministic: moments of the Marchenko-Pastur law, the
limiting covariance of quadratic forms in a standard sample covariance and
its inverse (a Hadamard product of an alignment factor and a spectral-noise
factor), the limiting covariance of the five raw frontier forms, and the
delta-method transform that maps the latter onto the covariance of the
frontier statistics. Monte Carlo checks in the simulation harness compare
empirical covariances against these matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .config import TOL
from .errors import NormViolation
from .portfolio import FrontierStats

__all__ = [
    "QuadFormLimit",
    "FrontierFormLimit",
    "mp_moments",
    "mp_moment_quadrature",
    "lambda_matrix",
    "lambda_values_from_moments",
    "theta_matrix",
    "quadform_limit",
    "xi_matrix",
    "delta_transform",
]


def _check_c_open(c: float) -> float:
    c = float(c)
    if not 0.0 < c < 1.0:
        raise ValueError(f"concentration ratio must lie in (0, 1), got {c!r}")
    return c


def mp_moments(c: float) -> tuple[float, float, float, float]:
    """First two moments of the Marchenko-Pastur law and of its reciprocal.

    Returns (m1, m2, minv1, minv2) = (1, 1 + c, 1/(1-c), 1/(1-c)^3) for a
    concentration ratio c in (0, 1).
    """
    c = _check_c_open(c)
    k = 1.0 - c
    return 1.0, 1.0 + c, 1.0 / k, 1.0 / k ** 3


def mp_moment_quadrature(power: int, c: float) -> float:
    """Moment of z**power under the Marchenko-Pastur density by quadrature.

    Integrates the density sqrt((a+ - z)(z - a-)) / (2 pi c z) over its
    support; serves as the independent numerical check of the closed forms.
    """
    c = _check_c_open(c)
    lo = (1.0 - np.sqrt(c)) ** 2
    hi = (1.0 + np.sqrt(c)) ** 2

    def integrand(z: float) -> float:
        return z ** power * np.sqrt((hi - z) * (z - lo)) / (2.0 * np.pi * c * z)

    value, _ = integrate.quad(integrand, lo, hi, limit=200)
    return float(value)


def lambda_values_from_moments(c: float) -> tuple[float, float, float]:
    """Spectral-noise scalars derived from the Marchenko-Pastur moments."""
    m1, m2, minv1, minv2 = mp_moments(c)
    return m2 - m1 * m1, 1.0 - m1 * minv1, minv2 - minv1 * minv1


def lambda_matrix(c: float) -> np.ndarray:
    """Spectral-noise factor of the quadratic-form covariance.

    Entry (1,1) is c, the remaining first-row/column entries are -c/(1-c),
    and all others are c/(1-c)^3.
    """
    c = _check_c_open(c)
    k = 1.0 - c
    lam = np.full((4, 4), c / k ** 3)
    lam[0, :] = lam[:, 0] = -c / k
    lam[0, 0] = c
    return lam


def theta_matrix(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray) -> np.ndarray:
    """Alignment factor of the quadratic-form covariance.

    The three direction vectors must have unit Euclidean norm; the limits in
    the population statement are replaced by the finite-dimensional inner
    products, the desk-scale surrogate.
    """
    vecs = [np.asarray(v, dtype=np.float64) for v in (m1, m2, m3)]
    for i, v in enumerate(vecs, start=1):
        if v.ndim != 1:
            raise NormViolation(f"direction {i} must be a vector")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > TOL.unit_norm_abs:
            raise NormViolation(f"direction {i} has norm {norm!r}, expected 1")
    a = float(vecs[0] @ vecs[1])
    b = float(vecs[0] @ vecs[2])
    g = float(vecs[1] @ vecs[2])
    return np.array([
        [1.0, a * a, a * b, b * b],
        [a * a, 1.0, g, g * g],
        [a * b, g, 0.5 + 0.5 * g * g, g],
        [b * b, g * g, g, 1.0],
    ])


@dataclass(frozen=True)
class QuadFormLimit:
    """Limiting covariance structure of normalized quadratic forms.

    Holds the alignment factor, the spectral-noise factor and the
    concentration ratio; the full asymptotic covariance is their elementwise
    product scaled by 2/c (the explicit prefactor avoids normalization
    mistakes in Monte Carlo comparisons).
    """

    theta_mat: np.ndarray
    lambda_mat: np.ndarray
    c: float

    @property
    def covariance(self) -> np.ndarray:
        return (2.0 / self.c) * self.theta_mat * self.lambda_mat


def quadform_limit(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray, c: float) -> QuadFormLimit:
    """Bundle the alignment and spectral factors for three unit directions."""
    return QuadFormLimit(theta_mat=theta_matrix(m1, m2, m3),
                         lambda_mat=lambda_matrix(c), c=_check_c_open(c))


@dataclass(frozen=True)
class FrontierFormLimit:
    """Limiting covariance of the five raw frontier forms.

    ``s_star`` is the shifted slope s + r_gmv^2 / v_gmv + 1 that appears in
    several entries.
    """

    xi: np.ndarray
    s_star: float


def xi_matrix(frontier: FrontierStats, c: float) -> FrontierFormLimit:
    """Limiting covariance of the centered raw forms underlying the estimators.

    The five forms are, in order: ones-precision-mean, ones-precision-ones,
    mean-precision-mean (each against the sample covariance inverse, centered
    at its inflated limit), the target portfolio's sample mean, and the target
    portfolio's sample variance.
    """
    c = float(c)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"concentration ratio must lie in [0, 1), got {c!r}")
    if frontier.v_gmv <= 0.0:
        raise ValueError("minimum variance must be positive")
    k = 1.0 - c
    r, v, s = frontier.r_gmv, frontier.v_gmv, frontier.s
    r_b, v_b = frontier.r_b, frontier.v_b
    s_star = s + r * r / v + 1.0
    k3 = k ** 3
    xi = np.array([
        [(s_star + r * r / v) / (k3 * v), 2.0 * r / (k3 * v * v),
         2.0 * r * s_star / (k3 * v), 1.0 / k, -2.0 * r_b / k],
        [2.0 * r / (k3 * v * v), 2.0 / (k3 * v * v),
         2.0 * r * r / (k3 * v * v), 0.0, -2.0 / k],
        [2.0 * r * s_star / (k3 * v), 2.0 * r * r / (k3 * v * v),
         2.0 * (s_star ** 2 + c - 1.0) / k3, 2.0 * r_b / k, -2.0 * r_b ** 2 / k],
        [1.0 / k, 0.0, 2.0 * r_b / k, v_b, 0.0],
        [-2.0 * r_b / k, -2.0 / k, -2.0 * r_b ** 2 / k, 0.0, 2.0 * v_b ** 2],
    ])
    return FrontierFormLimit(xi=xi, s_star=s_star)


def delta_transform(frontier: FrontierStats, c: float,
                    r_gmv_hat: float | None = None,
                    v_c_hat: float | None = None) -> np.ndarray:
    """Linear map from raw-form errors to frontier-statistic errors.

    The matrix carries one data-dependent entry, the coefficient of the first
    raw form in the corrected-slope row; for oracle checks it is evaluated at
    the population values (the default), where it equals
    ``-2 (1-c) r_gmv``. With that entry the identity
    ``omega = D xi D'`` holds exactly at population values. The last two rows
    are identity rows: target mean and variance pass through unchanged.
    """
    c = float(c)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"concentration ratio must lie in [0, 1), got {c!r}")
    k = 1.0 - c
    r, v = frontier.r_gmv, frontier.v_gmv
    vc = v if v_c_hat is None else float(v_c_hat)
    rg = r if r_gmv_hat is None else float(r_gmv_hat)
    d = np.zeros((5, 5))
    d[0, 0] = k * vc
    d[0, 1] = -k * vc * r
    d[1, 1] = -k * vc * v
    # slope row: the first entry sums the population and plug-in mean-to-variance
    # ratios, which collapses to -2 (1-c) r_gmv in the limit
    d[2, 0] = -k * vc * (r / v + rg / vc)
    d[2, 1] = k * vc * r * r / v
    d[2, 2] = k
    d[3, 3] = 1.0
    d[4, 4] = 1.0
    return d
