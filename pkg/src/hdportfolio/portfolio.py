"""Optimal portfolio weights and the frontier characteristics behind them.

The expected-utility (EU) optimal portfolio under a full-investment constraint
is the minimum-variance portfolio plus a risk-aversion-scaled tilt along the
projected mean. Five scalars summarize everything the inferential machinery
needs: the minimum-variance portfolio's expected return and variance, the
frontier slope, and the target portfolio's expected return and variance.
This module computes those both for known population parameters and from
sample moments, including the dimension-corrected (consistent) versions used
when the asset count grows with the sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .config import TOL
from .errors import DegenerateSlope, NotPositiveDefinite
from .statcore import MomentEstimates, PrecisionBundle, cholesky_spd, precision_bundle

__all__ = [
    "GAMMA_INF",
    "WeightKind",
    "ModelParams",
    "PortfolioWeights",
    "FrontierStats",
    "EstimatedStats",
    "gmv_weights",
    "eu_weights",
    "plugin_eu_weights",
    "frontier_stats",
    "estimated_stats",
    "eta_consistent",
    "eta_limit",
]

# Distinguished risk-aversion value selecting the fully risk-averse
# (minimum-variance) branch exactly, never approximated by a large float.
GAMMA_INF = math.inf


class WeightKind(Enum):
    GMV = "gmv"
    EU = "eu"
    PLUGIN_EU = "plugin_eu"
    SHRINKAGE = "shrinkage"
    TARGET = "target"


def _validate_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if math.isnan(gamma) or gamma <= 0.0:
        raise ValueError(f"risk aversion must be positive or infinite, got {gamma}")
    return gamma


@dataclass(frozen=True)
class ModelParams:
    """True mean vector, covariance matrix and risk aversion of the model.

    The covariance is checked to be symmetric positive definite on
    construction. ``gamma`` may be ``GAMMA_INF`` to select the fully
    risk-averse investor.
    """

    mu: np.ndarray
    sigma: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValueError("mu must be a vector and sigma a matching square matrix")
        cholesky_spd(sigma, "sigma")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", _validate_gamma(self.gamma))

    @property
    def p(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class PortfolioWeights:
    """A fully invested weight vector; the components must sum to one."""

    w: np.ndarray
    kind: WeightKind = WeightKind.TARGET

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("weights must form a vector")
        total = float(w.sum())
        if abs(total - 1.0) > TOL.weight_sum_abs:
            raise ValueError(f"weights must sum to one, got {total!r}")
        object.__setattr__(self, "w", w)

    @property
    def p(self) -> int:
        return self.w.size

    @staticmethod
    def equally_weighted(p: int) -> "PortfolioWeights":
        return PortfolioWeights(np.full(p, 1.0 / p), WeightKind.TARGET)


@dataclass(frozen=True)
class FrontierStats:
    """Population frontier characteristics.

    ``r_gmv``/``v_gmv`` are the minimum-variance portfolio's mean and
    variance, ``s`` the frontier slope (a squared-Sharpe-type curvature,
    always nonnegative), ``r_b``/``v_b`` the target portfolio's mean and
    variance.
    """

    r_gmv: float
    v_gmv: float
    s: float
    r_b: float
    v_b: float

    def __post_init__(self) -> None:
        if self.v_gmv <= 0.0 or self.v_b <= 0.0:
            raise ValueError("portfolio variances must be positive")
        if self.s < -TOL.variance_clamp:
            raise ValueError(f"frontier slope must be nonnegative, got {self.s!r}")
        object.__setattr__(self, "s", max(float(self.s), 0.0))


@dataclass(frozen=True)
class EstimatedStats:
    """Sample frontier characteristics with their dimension-consistent versions.

    ``v_c_hat`` rescales the plug-in minimum variance by 1/(1-c_n) and
    ``s_c_hat = (1-c_n) * s_hat - c_n`` corrects the plug-in slope. The
    corrected slope may be negative in finite samples and is passed through
    untruncated; downstream consumers must tolerate that.
    """

    r_gmv_hat: float
    v_gmv_hat: float
    v_c_hat: float
    s_hat: float
    s_c_hat: float
    r_b_hat: float
    v_b_hat: float
    c_n: float

    def __post_init__(self) -> None:
        if self.v_gmv_hat <= 0.0:
            raise ValueError("estimated minimum variance must be positive")
        if not 0.0 <= self.c_n < 1.0:
            raise ValueError(f"c_n must lie in [0, 1), got {self.c_n!r}")
        expected = self.v_gmv_hat / (1.0 - self.c_n)
        if not math.isclose(self.v_c_hat, expected, rel_tol=1e-12):
            raise ValueError("v_c_hat must equal v_gmv_hat / (1 - c_n)")


def gmv_weights(bundle: PrecisionBundle) -> PortfolioWeights:
    """Global minimum variance weights: precision @ 1 normalized to sum one."""
    w = bundle.precision @ np.ones(bundle.p) / bundle.ones_quadform
    return PortfolioWeights(w, WeightKind.GMV)


def eu_weights(params: ModelParams, bundle: PrecisionBundle | None = None) -> PortfolioWeights:
    """Expected-utility optimal weights for the given model.

    With infinite risk aversion this returns the minimum-variance weights
    exactly. Otherwise the minimum-variance weights are tilted by the
    projected mean scaled with 1/gamma.
    """
    if bundle is None:
        bundle = precision_bundle(params.sigma)
    gmv = gmv_weights(bundle)
    if params.gamma == GAMMA_INF:
        return gmv
    w = gmv.w + (bundle.q @ params.mu) / params.gamma
    return PortfolioWeights(w, WeightKind.EU)


def plugin_eu_weights(moments: MomentEstimates, gamma: float) -> PortfolioWeights:
    """Sample (plug-in) EU weights from estimated moments.

    Requires more observations than assets; otherwise the sample covariance
    is singular and :class:`NotPositiveDefinite` is raised.
    """
    gamma = _validate_gamma(gamma)
    if moments.n <= moments.p:
        raise NotPositiveDefinite(
            f"sample covariance with n={moments.n} <= p={moments.p} is singular")
    bundle = precision_bundle(moments.cov)
    gmv = gmv_weights(bundle)
    if gamma == GAMMA_INF:
        w = gmv.w
    else:
        w = gmv.w + (bundle.q @ moments.mean) / gamma
    return PortfolioWeights(w, WeightKind.PLUGIN_EU)


def _core_forms(cov: np.ndarray, mean: np.ndarray):
    """Cholesky-based quadratic forms shared by the frontier computations.

    Returns (ones_quadform, ones_mean_form, mean_quadform) for the precision
    metric, without forming the inverse.
    """
    factor = cholesky_spd(cov, "covariance")
    ones = np.ones(mean.size)
    rhs = np.column_stack([ones, mean])
    sol = sla.cho_solve(factor, rhs)
    u, v = sol[:, 0], sol[:, 1]
    return float(ones @ u), float(ones @ v), float(mean @ v)


def frontier_stats(params: ModelParams, b: PortfolioWeights) -> FrontierStats:
    """Population frontier characteristics for a model and target portfolio."""
    if b.p != params.p:
        raise ValueError("target portfolio dimension does not match the model")
    q11, q1m, qmm = _core_forms(params.sigma, params.mu)
    v_gmv = 1.0 / q11
    r_gmv = q1m / q11
    s = qmm - q1m * q1m / q11
    return FrontierStats(
        r_gmv=r_gmv,
        v_gmv=v_gmv,
        s=max(s, 0.0) if s > -TOL.variance_clamp else s,
        r_b=float(b.w @ params.mu),
        v_b=float(b.w @ params.sigma @ b.w),
    )


def estimated_stats(moments: MomentEstimates, b: PortfolioWeights) -> EstimatedStats:
    """Sample and dimension-corrected frontier characteristics.

    Requires n > p so the sample covariance can be inverted. The corrected
    slope may come out negative; it is reported as computed.
    """
    if b.p != moments.p:
        raise ValueError("target portfolio dimension does not match the moments")
    if moments.n <= moments.p:
        raise NotPositiveDefinite(
            f"sample covariance with n={moments.n} <= p={moments.p} is singular")
    c_n = moments.c_n
    q11, q1m, qmm = _core_forms(moments.cov, moments.mean)
    v_gmv_hat = 1.0 / q11
    s_hat = qmm - q1m * q1m / q11
    return EstimatedStats(
        r_gmv_hat=q1m / q11,
        v_gmv_hat=v_gmv_hat,
        v_c_hat=v_gmv_hat / (1.0 - c_n),
        s_hat=s_hat,
        s_c_hat=(1.0 - c_n) * s_hat - c_n,
        r_b_hat=float(b.w @ moments.mean),
        v_b_hat=float(b.w @ moments.cov @ b.w),
        c_n=c_n,
    )


def _eta_raw(cov: np.ndarray, mean: np.ndarray, l: np.ndarray):
    """Projected-mean contrasts L Q mean and the slope mean' Q mean."""
    factor = cholesky_spd(cov, "covariance")
    ones = np.ones(mean.size)
    rhs = np.column_stack([ones, mean])
    sol = sla.cho_solve(factor, rhs)
    u, v = sol[:, 0], sol[:, 1]
    q11 = float(ones @ u)
    q1m = float(ones @ v)
    slope = float(mean @ v) - q1m * q1m / q11
    lqm = l @ v - (l @ u) * (q1m / q11)
    return lqm, slope


def eta_consistent(moments: MomentEstimates, l: np.ndarray, floor_slope: bool = False) -> np.ndarray:
    """Dimension-consistent estimator of the normalized projected-mean contrasts.

    The plain ratio L Q mean / slope is rescaled by (s_c + c_n)/s_c to remove
    the high-dimensional bias. When the corrected slope is numerically zero
    the quantity is undefined and :class:`DegenerateSlope` is raised.
    ``floor_slope`` optionally floors the corrected slope at the configured
    epsilon inside the rescaling ratio (off by default; the untruncated value
    is what the test statistics are derived for).
    """
    lmat = np.atleast_2d(np.asarray(l, dtype=np.float64))
    if lmat.shape[1] != moments.p:
        raise ValueError("contrast matrix has the wrong number of columns")
    lqm, s_hat = _eta_raw(moments.cov, moments.mean, lmat)
    if abs(s_hat) < TOL.slope_epsilon:
        raise DegenerateSlope(f"plug-in slope {s_hat!r} is numerically zero")
    c_n = moments.c_n
    s_c = (1.0 - c_n) * s_hat - c_n
    if floor_slope:
        s_c = max(s_c, TOL.slope_epsilon)
    if abs(s_c) < TOL.slope_epsilon:
        raise DegenerateSlope(f"corrected slope {s_c!r} is numerically zero")
    return ((s_c + c_n) / s_c) * (lqm / s_hat)


def eta_limit(params: ModelParams, l: np.ndarray) -> np.ndarray:
    """Population counterpart of :func:`eta_consistent`: L Q mu / (mu' Q mu)."""
    lmat = np.atleast_2d(np.asarray(l, dtype=np.float64))
    if lmat.shape[1] != params.p:
        raise ValueError("contrast matrix has the wrong number of columns")
    lqm, s = _eta_raw(params.sigma, params.mu, lmat)
    if abs(s) < TOL.slope_epsilon:
        raise DegenerateSlope("frontier slope is zero; normalized contrasts are undefined")
    return lqm / s
