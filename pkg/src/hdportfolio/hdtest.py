"""Hypothesis tests on EU portfolio weights and their confidence intervals.

Four tests are provided. Two quadratic-form (Mahalanobis-type) tests check a
finite set of linear restrictions ``L w = r`` on the weights: the classical
one is calibrated for asset counts much smaller than the sample size, the
high-dimensional one corrects every ingredient for the concentration ratio.
Both reject in the upper tail of a chi-square reference with as many degrees
of freedom as restrictions.

The two shrinkage tests check the whole weight vector at once against a
candidate ``w0``: if ``w0`` is EU optimal, the limiting shrinkage intensity
with target ``w0`` is zero, so the standardized estimated intensity is
asymptotically standard normal and rejection is two-sided. They differ only
in which consistent estimate of the 5x5 statistic covariance standardizes the
numerator; the second variant exploits the null restriction linking the slope
to the target's expected return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla
from scipy import stats as spstats

from .config import TOL
from .errors import DegenerateSlope, NotPositiveDefinite, SingularMidMatrix, ZeroDenominator
from .portfolio import (
    EstimatedStats,
    ModelParams,
    PortfolioWeights,
    estimated_stats,
    eu_weights,
    frontier_stats,
)
from .shrinkage import (
    OmegaVariant,
    estimated_intensity,
    limiting_intensity,
    omega_alpha,
    sensitivity_vectors,
)
from .statcore import MomentEstimates, cholesky_spd, symmetrize

__all__ = [
    "DistFamily",
    "LinearHypothesis",
    "TestResult",
    "ConfidenceInterval",
    "test_mahalanobis",
    "test_mahalanobis_hd",
    "test_shrinkage",
    "test_shrinkage_tilde",
    "shrinkage_ci",
    "mahalanobis_noncentrality",
    "mahalanobis_hd_noncentrality",
    "chi2_cdf",
    "chi2_quantile",
    "noncentral_chi2_cdf",
    "normal_cdf",
    "normal_quantile",
]


# ---------------------------------------------------------------------------
# reference distributions


def chi2_cdf(x: float, k: int) -> float:
    """Central chi-square CDF with k degrees of freedom."""
    if k < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {k}")
    return float(spstats.chi2.cdf(x, k))


def chi2_quantile(q: float, k: int) -> float:
    """Central chi-square quantile; q must lie strictly between 0 and 1."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")
    if k < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {k}")
    return float(spstats.chi2.ppf(q, k))


def noncentral_chi2_cdf(x: float, k: int, lam: float) -> float:
    """Noncentral chi-square CDF; reduces to the central one at lam = 0."""
    if k < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {k}")
    if lam < 0.0:
        raise ValueError(f"noncentrality must be nonnegative, got {lam!r}")
    if lam == 0.0:
        return chi2_cdf(x, k)
    return float(spstats.ncx2.cdf(x, k, lam))


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    return float(spstats.norm.cdf(x))


def normal_quantile(q: float) -> float:
    """Standard normal quantile; q must lie strictly between 0 and 1."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")
    return float(spstats.norm.ppf(q))


# ---------------------------------------------------------------------------
# result types


class DistFamily(Enum):
    CHI2 = "chi2"
    NORMAL = "normal"


@dataclass(frozen=True)
class LinearHypothesis:
    """k linear restrictions L w = r on the weight vector.

    Requires 1 <= k < p - 1 and linearly independent rows.
    """

    l: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        lmat = np.atleast_2d(np.asarray(self.l, dtype=np.float64))
        rvec = np.atleast_1d(np.asarray(self.r, dtype=np.float64))
        k, p = lmat.shape
        if rvec.shape != (k,):
            raise ValueError("restriction vector length must match the row count of L")
        if not 1 <= k < p - 1:
            raise ValueError(f"need 1 <= k < p - 1, got k={k}, p={p}")
        if np.linalg.matrix_rank(lmat) < k:
            raise ValueError("restriction rows must be linearly independent")
        object.__setattr__(self, "l", lmat)
        object.__setattr__(self, "r", rvec)

    @property
    def k(self) -> int:
        return self.l.shape[0]

    @property
    def p(self) -> int:
        return self.l.shape[1]

    @staticmethod
    def first_k_weights(r: np.ndarray, p: int) -> "LinearHypothesis":
        """Restrict the first len(r) weights to the given values."""
        r = np.atleast_1d(np.asarray(r, dtype=np.float64))
        k = r.size
        lmat = np.zeros((k, p))
        lmat[:, :k] = np.eye(k)
        return LinearHypothesis(l=lmat, r=r)


@dataclass(frozen=True)
class TestResult:
    """Statistic, reference distribution and p-value of one test run.

    ``reject_at(beta)`` is equivalent to ``p_value < beta`` under each test's
    own convention (upper tail for chi-square, two-sided for normal).
    ``noncentrality`` is populated only when population parameters were
    supplied for oracle use.
    """

    statistic: float
    family: DistFamily
    df: int | None
    p_value: float
    noncentrality: float | None = None

    def reject_at(self, beta: float = 0.05) -> bool:
        if not 0.0 < beta < 1.0:
            raise ValueError(f"significance level must lie in (0, 1), got {beta!r}")
        return self.p_value < beta


@dataclass(frozen=True)
class ConfidenceInterval:
    """Symmetric interval center +/- half_width at the given coverage level."""

    center: float
    half_width: float
    level: float

    def __post_init__(self) -> None:
        if self.half_width < 0.0:
            raise ValueError("half width must be nonnegative")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"coverage level must lie in (0, 1), got {self.level!r}")

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


# ---------------------------------------------------------------------------
# shared internals


def _solve_quadform(mid: np.ndarray, diff: np.ndarray) -> float:
    """diff' mid^{-1} diff with SPD factorization and a general fallback."""
    mid = symmetrize(np.asarray(mid, dtype=np.float64))
    try:
        factor = sla.cho_factor(mid, lower=True, check_finite=True)
        sol = sla.cho_solve(factor, diff)
    except (sla.LinAlgError, ValueError):
        try:
            sol = np.linalg.solve(mid, diff)
        except np.linalg.LinAlgError as exc:
            raise SingularMidMatrix(f"statistic mid matrix is singular: {exc}") from exc
    value = float(diff @ sol)
    if not math.isfinite(value):
        raise SingularMidMatrix("statistic mid matrix is numerically singular")
    return value


@dataclass(frozen=True)
class _Parts:
    """Precision-weighted pieces entering the quadratic-form statistics."""

    q11: float        # ones' P ones
    q1x: float        # ones' P mean
    s_hat: float      # mean' Q mean
    lu: np.ndarray    # L P ones
    lql: np.ndarray   # L Q L'
    lqx: np.ndarray   # L Q mean


def _parts_from(cov: np.ndarray, mean: np.ndarray, lmat: np.ndarray) -> _Parts:
    factor = cholesky_spd(cov, "covariance")
    ones = np.ones(mean.size)
    rhs = np.column_stack([ones, mean, lmat.T])
    sol = sla.cho_solve(factor, rhs)
    u, v, w = sol[:, 0], sol[:, 1], sol[:, 2:]
    q11 = float(ones @ u)
    q1x = float(ones @ v)
    lu = lmat @ u
    lql = symmetrize(lmat @ w - np.outer(lu, lu) / q11)
    lqx = lmat @ v - lu * (q1x / q11)
    s_hat = float(mean @ v) - q1x * q1x / q11
    return _Parts(q11=q11, q1x=q1x, s_hat=s_hat, lu=lu, lql=lql, lqx=lqx)


def _tl_mid_matrix(lql: np.ndarray, lqx: np.ndarray, s_hat: float,
                   ones_quadform: float, gamma: float) -> np.ndarray:
    """Studentizing matrix of the classical statistic.

    The scalar slope multiplies the contrast Gram matrix in the quadratic
    term; the subtracted part is the outer product of the projected mean
    contrasts (the only dimensionally consistent grouping).
    """
    return (lql / ones_quadform
            + lql / (gamma * s_hat)
            + (s_hat * lql - np.outer(lqx, lqx)) / gamma ** 2)


def _tl_statistic(parts: _Parts, r: np.ndarray, gamma: float, n: int, p: int) -> float:
    if abs(parts.s_hat) < TOL.slope_epsilon:
        raise DegenerateSlope("plug-in slope is numerically zero")
    w_l = parts.lu / parts.q11 + parts.lqx / gamma
    mid = _tl_mid_matrix(parts.lql, parts.lqx, parts.s_hat, parts.q11, gamma)
    return (n - p + 1) * _solve_quadform(mid, w_l - r)


def _tlc_omega(lql: np.ndarray, eta: np.ndarray, s_c: float, v_c: float,
               gamma: float, c: float) -> np.ndarray:
    """Covariance matrix standardizing the dimension-corrected contrasts."""
    k = 1.0 - c
    coef_lql = ((k / (s_c + c) + (s_c + c) / gamma) / gamma + v_c) * k
    coef_eta = (2.0 * k * c ** 3 / (s_c + c) ** 2
                + 4.0 * k * c * s_c * (s_c + 2.0 * c) / (s_c + c) ** 2
                + 2.0 * k * c ** 2 * (s_c + c) ** 2 / s_c ** 2
                - s_c ** 2) / gamma ** 2
    return coef_lql * lql + coef_eta * np.outer(eta, eta)


def _tlc_statistic(parts: _Parts, r: np.ndarray, gamma: float, n: int, p: int,
                   c_n: float) -> float:
    if abs(parts.s_hat) < TOL.slope_epsilon:
        raise DegenerateSlope("plug-in slope is numerically zero")
    s_c = (1.0 - c_n) * parts.s_hat - c_n
    if abs(s_c) < TOL.slope_epsilon:
        raise DegenerateSlope("corrected slope is numerically zero")
    eta_lc = ((s_c + c_n) / s_c) * (parts.lqx / parts.s_hat)
    w_lc = parts.lu / parts.q11 + (s_c / gamma) * eta_lc
    v_c = (1.0 / parts.q11) / (1.0 - c_n)
    omega = _tlc_omega(parts.lql, eta_lc, s_c, v_c, gamma, c_n)
    return (n - p) * _solve_quadform(omega, w_lc - r)


def _require_finite_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0.0:
        raise ValueError(f"tests require finite positive risk aversion, got {gamma!r}")
    return gamma


def _check_hypothesis(moments: MomentEstimates, hyp: LinearHypothesis) -> None:
    if hyp.p != moments.p:
        raise ValueError("hypothesis dimension does not match the moments")


# ---------------------------------------------------------------------------
# quadratic-form tests


def test_mahalanobis(moments: MomentEstimates, hyp: LinearHypothesis, gamma: float,
                     params: ModelParams | None = None) -> TestResult:
    """Classical quadratic-form test of L w = r on the plug-in EU weights.

    Valid when the asset count is much smaller than the sample size; in the
    proportional regime its size inflates badly, which is the motivation for
    the corrected tests. Requires n > p + 1. Supplying ``params`` also
    computes the oracle noncentrality for power analysis.
    """
    gamma = _require_finite_gamma(gamma)
    _check_hypothesis(moments, hyp)
    if moments.n <= moments.p + 1:
        raise NotPositiveDefinite(
            f"classical statistic needs n > p + 1, got n={moments.n}, p={moments.p}")
    parts = _parts_from(moments.cov, moments.mean, hyp.l)
    stat = _tl_statistic(parts, hyp.r, gamma, moments.n, moments.p)
    lam = None
    if params is not None:
        lam = mahalanobis_noncentrality(params, hyp, gamma, moments.n)
    return TestResult(statistic=stat, family=DistFamily.CHI2, df=hyp.k,
                      p_value=float(spstats.chi2.sf(stat, hyp.k)), noncentrality=lam)


def test_mahalanobis_hd(moments: MomentEstimates, hyp: LinearHypothesis, gamma: float,
                        params: ModelParams | None = None) -> TestResult:
    """Dimension-corrected quadratic-form test of L w = r.

    Every ingredient (weights, slope, variance, covariance of the contrasts)
    is replaced by its consistent high-dimensional version, keeping the
    chi-square calibration when p/n is not small. Requires n > p.
    """
    gamma = _require_finite_gamma(gamma)
    _check_hypothesis(moments, hyp)
    if moments.n <= moments.p:
        raise NotPositiveDefinite(
            f"corrected statistic needs n > p, got n={moments.n}, p={moments.p}")
    parts = _parts_from(moments.cov, moments.mean, hyp.l)
    stat = _tlc_statistic(parts, hyp.r, gamma, moments.n, moments.p, moments.c_n)
    lam = None
    if params is not None:
        lam = mahalanobis_hd_noncentrality(params, hyp, gamma, moments.n, moments.c_n)
    return TestResult(statistic=stat, family=DistFamily.CHI2, df=hyp.k,
                      p_value=float(spstats.chi2.sf(stat, hyp.k)), noncentrality=lam)


def mahalanobis_noncentrality(params: ModelParams, hyp: LinearHypothesis,
                              gamma: float, n: int) -> float:
    """Oracle noncentrality of the classical test at population parameters.

    Uses the population projection matrix in every term.
    """
    gamma = _require_finite_gamma(gamma)
    parts = _parts_from(params.sigma, params.mu, hyp.l)
    if abs(parts.s_hat) < TOL.slope_epsilon:
        raise DegenerateSlope("population slope is zero")
    w_l = parts.lu / parts.q11 + parts.lqx / gamma
    mid = _tl_mid_matrix(parts.lql, parts.lqx, parts.s_hat, parts.q11, gamma)
    return n * _solve_quadform(mid, w_l - hyp.r)


def mahalanobis_hd_noncentrality(params: ModelParams, hyp: LinearHypothesis,
                                 gamma: float, n: int, c: float) -> float:
    """Oracle noncentrality of the corrected test at population parameters."""
    gamma = _require_finite_gamma(gamma)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"concentration ratio must lie in [0, 1), got {c!r}")
    parts = _parts_from(params.sigma, params.mu, hyp.l)
    s = parts.s_hat
    if abs(s) < TOL.slope_epsilon:
        raise DegenerateSlope("population slope is zero")
    eta = parts.lqx / s
    w_l = parts.lu / parts.q11 + parts.lqx / gamma
    omega = _tlc_omega(parts.lql, eta, s, 1.0 / parts.q11, gamma, c)
    return (n - hyp.p) * _solve_quadform(omega, w_l - hyp.r)


# ---------------------------------------------------------------------------
# shrinkage tests


def _shrinkage_statistic(est: EstimatedStats, n: int, gamma: float, c_n: float,
                         variant: OmegaVariant) -> float:
    """Standardized intensity statistic from precomputed estimates."""
    decomp = estimated_intensity(est, gamma, c_n)
    sens = sensitivity_vectors(decomp, gamma, c_n)
    om = omega_alpha(est, c_n, variant, gamma=gamma)
    quad = float(sens.d0 @ om.omega @ sens.d0)
    if quad <= 0.0:
        raise ZeroDenominator(f"null variance quadratic form is {quad!r}")
    # alpha_hat * b_den equals the numerator exactly, so the statistic is
    # sqrt(n) * a_num / sqrt(d0' Omega d0)
    return math.sqrt(n) * decomp.a_num / math.sqrt(quad)


def _normal_result(stat: float) -> TestResult:
    return TestResult(statistic=stat, family=DistFamily.NORMAL, df=None,
                      p_value=float(2.0 * spstats.norm.sf(abs(stat))))


def test_shrinkage(moments: MomentEstimates, w0: PortfolioWeights, gamma: float,
                   c_n: float | None = None) -> TestResult:
    """Whole-vector test of ``w_EU = w0`` through the shrinkage intensity.

    The estimated intensity with target ``w0`` is standardized by the
    consistent plug-in covariance estimate; under the null it is
    asymptotically standard normal and rejection is two-sided.

    Rejection implies that ``w0`` is not the EU optimal vector. The converse
    does not hold: a zero limiting intensity does not force the weights to
    coincide, so non-rejection is not evidence of optimality.
    """
    gamma = _require_finite_gamma(gamma)
    est = estimated_stats(moments, w0)
    stat = _shrinkage_statistic(est, moments.n, gamma,
                                moments.c_n if c_n is None else float(c_n),
                                OmegaVariant.HAT)
    return _normal_result(stat)


def test_shrinkage_tilde(moments: MomentEstimates, w0: PortfolioWeights, gamma: float,
                         c_n: float | None = None) -> TestResult:
    """Variant of :func:`test_shrinkage` using the null-restricted covariance.

    Under the null the frontier slope equals gamma times the excess expected
    return of the target over the minimum-variance portfolio; substituting
    that relation gives an alternative consistent standardization.
    """
    gamma = _require_finite_gamma(gamma)
    est = estimated_stats(moments, w0)
    stat = _shrinkage_statistic(est, moments.n, gamma,
                                moments.c_n if c_n is None else float(c_n),
                                OmegaVariant.TILDE)
    return _normal_result(stat)


def shrinkage_ci(moments: MomentEstimates, w0: PortfolioWeights, gamma: float,
                 c_n: float | None = None, level: float = 0.95,
                 variant: OmegaVariant = OmegaVariant.HAT) -> ConfidenceInterval:
    """Confidence interval for the limiting intensity with target ``w0``.

    By test duality the corresponding shrinkage test rejects at level
    ``1 - level`` exactly when the interval excludes zero.
    """
    gamma = _require_finite_gamma(gamma)
    if not 0.0 < level < 1.0:
        raise ValueError(f"coverage level must lie in (0, 1), got {level!r}")
    if variant is OmegaVariant.POPULATION:
        raise ValueError("confidence intervals use an estimated covariance variant")
    cc = moments.c_n if c_n is None else float(c_n)
    est = estimated_stats(moments, w0)
    decomp = estimated_intensity(est, gamma, cc)
    sens = sensitivity_vectors(decomp, gamma, cc)
    om = omega_alpha(est, cc, variant, gamma=gamma)
    quad = float(sens.d0 @ om.omega @ sens.d0)
    if quad <= 0.0:
        raise ZeroDenominator(f"null variance quadratic form is {quad!r}")
    beta = 1.0 - level
    z = normal_quantile(1.0 - beta / 2.0)
    half = z * math.sqrt(quad) / (math.sqrt(moments.n) * abs(decomp.b_den))
    return ConfidenceInterval(center=decomp.alpha, half_width=half, level=level)


def eu_truth_hypothesis(params: ModelParams, k: int) -> LinearHypothesis:
    """Null restriction fixing the first k weights at their true values."""
    w_true = eu_weights(params)
    return LinearHypothesis.first_k_weights(w_true.w[:k], params.p)


def null_target(params: ModelParams) -> PortfolioWeights:
    """The true EU weights packaged as a shrinkage target (exact null)."""
    return PortfolioWeights(eu_weights(params).w)


def population_alpha_null_gap(params: ModelParams, w0: PortfolioWeights, c: float) -> float:
    """Limiting intensity numerator with target ``w0``; zero when w0 is EU optimal."""
    fr = frontier_stats(params, w0)
    return limiting_intensity(fr, params.gamma, c).a_num
