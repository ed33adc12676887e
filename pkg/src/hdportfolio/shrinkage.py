"""Optimal shrinkage of sample EU portfolio weights toward a fixed target.

The shrinkage estimator is the convex combination ``alpha * w_sample +
(1 - alpha) * b`` of the plug-in weights and a deterministic target ``b``
that sums to one. Three intensities appear here:

* the oracle intensity, which maximizes the mean-variance objective of the
  combination and depends on both population and sample quantities;
* its deterministic high-dimensional limit, a ratio A/B of frontier
  characteristics and the concentration ratio c; and
* the estimated intensity, the same ratio evaluated at dimension-consistent
  sample statistics.

The module also provides the asymptotic variance machinery for the estimated
intensity: the sensitivity (gradient) vectors of A/B with respect to the five
frontier statistics, the 5x5 limiting covariance of those statistics in its
population and two estimated flavors, and the scalar variance d' Omega d / B^2
that standardizes the intensity for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import TOL
from .errors import NegativeVariance, ZeroDenominator, ZeroDirection
from .portfolio import (
    GAMMA_INF,
    EstimatedStats,
    FrontierStats,
    ModelParams,
    PortfolioWeights,
    WeightKind,
)

__all__ = [
    "OmegaVariant",
    "IntensityDecomposition",
    "SensitivityVector",
    "OmegaAlpha",
    "oracle_intensity",
    "limiting_intensity",
    "estimated_intensity",
    "bfgse_weights",
    "sensitivity_vectors",
    "omega_alpha",
    "intensity_variance",
    "gmv_intensity_variance",
]


class OmegaVariant(Enum):
    POPULATION = "population"
    HAT = "hat"
    TILDE = "tilde"


@dataclass(frozen=True)
class IntensityDecomposition:
    """Numerator and denominator of a shrinkage intensity ratio."""

    a_num: float
    b_den: float

    def __post_init__(self) -> None:
        if self.b_den == 0.0:
            raise ZeroDenominator("intensity denominator is zero")

    @property
    def alpha(self) -> float:
        return self.a_num / self.b_den


@dataclass(frozen=True)
class SensitivityVector:
    """Gradient of the intensity ratio in the five frontier statistics.

    ``d`` is the gradient at the actual ratio A/B; ``d0`` is the same vector
    with the ratio replaced by zero, the value it takes under the null that
    the target portfolio is EU optimal.
    """

    d: np.ndarray
    d0: np.ndarray
    c_n: float
    gamma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", np.asarray(self.d, dtype=np.float64))
        object.__setattr__(self, "d0", np.asarray(self.d0, dtype=np.float64))


@dataclass(frozen=True)
class OmegaAlpha:
    """Limiting 5x5 covariance of the scaled frontier-statistic errors."""

    omega: np.ndarray
    variant: OmegaVariant

    def __post_init__(self) -> None:
        om = np.asarray(self.omega, dtype=np.float64)
        if om.shape != (5, 5):
            raise ValueError("omega must be 5x5")
        object.__setattr__(self, "omega", om)


def oracle_intensity(params: ModelParams, w_hat: PortfolioWeights, b: PortfolioWeights) -> float:
    """Mean-variance-optimal combination weight of sample and target portfolios.

    Maximizes the expected-utility objective of ``alpha * w_hat +
    (1 - alpha) * b`` over alpha, which gives

        (w_hat - b)'(mu - gamma * Sigma b) / (gamma * (w_hat - b)' Sigma (w_hat - b)).

    With infinite risk aversion the variance of the combination is minimized
    instead, giving ``-(w_hat - b)' Sigma b / ((w_hat - b)' Sigma (w_hat - b))``,
    the algebraic limit of the general expression.
    """
    delta = w_hat.w - b.w
    if not np.any(delta):
        raise ZeroDirection("sample weights equal the target; intensity is undefined")
    sigma_delta = params.sigma @ delta
    den = float(delta @ sigma_delta)
    if den <= 0.0:
        raise ZeroDirection("shrinkage direction has zero variance")
    sigma_b = params.sigma @ b.w
    if params.gamma == GAMMA_INF:
        return -float(delta @ sigma_b) / den
    num = float(delta @ (params.mu - params.gamma * sigma_b))
    return num / (params.gamma * den)


def _decompose(r_gmv: float, v_gmv: float, s: float, r_b: float, v_b: float,
               gamma: float, c: float) -> IntensityDecomposition:
    """Numerator/denominator of the limiting intensity at concentration c.

    The pair is normalized so that the gradient formulas of
    :func:`sensitivity_vectors` apply verbatim; any common rescaling of the
    pair leaves the standardized test statistic unchanged.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError(f"concentration ratio must lie in [0, 1), got {c!r}")
    k = 1.0 - c
    if gamma == GAMMA_INF:
        # Fully risk-averse branch in closed form, never a numerical limit.
        a = v_b - v_gmv
        terms = (v_gmv * (2.0 * c - 1.0) / k, v_b)
    else:
        a = (r_gmv - r_b) * (1.0 + 1.0 / k) + gamma * (v_b - v_gmv) + s / (gamma * k)
        terms = (
            gamma * v_gmv / k,
            -2.0 * gamma * v_gmv,
            -2.0 * (r_b - r_gmv) / k,
            (s + c) / (gamma * k ** 3),
            gamma * v_b,
        )
    b_den = float(sum(terms))
    scale = max(abs(t) for t in terms)
    if abs(b_den) < TOL.denominator_rel * max(scale, 1.0):
        raise ZeroDenominator(f"intensity denominator {b_den!r} vanishes at scale {scale!r}")
    return IntensityDecomposition(a_num=float(a), b_den=b_den)


def limiting_intensity(frontier: FrontierStats, gamma: float, c: float) -> IntensityDecomposition:
    """Deterministic limit of the optimal shrinkage intensity.

    For finite risk aversion this is the high-dimensional limit ratio of
    frontier characteristics. For the fully risk-averse investor it reduces
    to the closed form ``(1-c) L / (c + (1-c) L)`` in the excess variance
    ratio ``L = v_b / v_gmv - 1``.
    """
    return _decompose(frontier.r_gmv, frontier.v_gmv, frontier.s,
                      frontier.r_b, frontier.v_b, float(gamma), float(c))


def estimated_intensity(est: EstimatedStats, gamma: float, c_n: float | None = None) -> IntensityDecomposition:
    """Consistent estimator of the limiting intensity from sample statistics.

    Evaluates the same ratio as :func:`limiting_intensity` at the
    dimension-consistent statistics; feeding population values reproduces the
    limiting decomposition exactly.
    """
    if c_n is None:
        c_n = est.c_n
    return _decompose(est.r_gmv_hat, est.v_c_hat, est.s_c_hat,
                      est.r_b_hat, est.v_b_hat, float(gamma), float(c_n))


def bfgse_weights(w_hat: PortfolioWeights, b: PortfolioWeights, alpha_hat: float) -> PortfolioWeights:
    """Bona fide shrinkage weights: alpha * w_hat + (1 - alpha) * b."""
    if w_hat.p != b.p:
        raise ValueError("weight vectors have different lengths")
    w = alpha_hat * w_hat.w + (1.0 - alpha_hat) * b.w
    return PortfolioWeights(w, WeightKind.SHRINKAGE)


def sensitivity_vectors(decomp: IntensityDecomposition, gamma: float, c_n: float) -> SensitivityVector:
    """Gradient of the intensity ratio with respect to the five statistics.

    The components correspond, in order, to the minimum-variance mean, the
    (corrected) minimum variance, the corrected slope, the target mean and
    the target variance. ``d0`` substitutes a zero ratio, the null value.
    """
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise ValueError("sensitivity vectors require finite risk aversion")
    if not 0.0 <= c_n < 1.0:
        raise ValueError(f"c_n must lie in [0, 1), got {c_n!r}")
    k = 1.0 - c_n

    def grad(ratio: float) -> np.ndarray:
        return np.array([
            1.0 + (1.0 - 2.0 * ratio) / k,
            -gamma * (1.0 + ratio * (1.0 / k - 2.0)),
            (1.0 - ratio / k ** 2) / (gamma * k),
            -1.0 - (1.0 - 2.0 * ratio) / k,
            gamma * (1.0 - ratio),
        ])

    return SensitivityVector(d=grad(decomp.alpha), d0=grad(0.0), c_n=c_n, gamma=gamma)


def _omega_entries(v: float, s_val: float, r_diff: float, v_b: float, c: float) -> np.ndarray:
    """Assemble the 5x5 covariance pattern shared by all three variants."""
    k = 1.0 - c
    return np.array([
        [v * (s_val + 1.0) / k, 0.0, 0.0, v, -2.0 * v * r_diff],
        [0.0, 2.0 * v * v / k, 0.0, 0.0, 2.0 * v * v],
        [0.0, 0.0, 2.0 * ((s_val + 1.0) ** 2 + c - 1.0) / k, 2.0 * r_diff, -2.0 * r_diff ** 2],
        [v, 0.0, 2.0 * r_diff, v_b, 0.0],
        [-2.0 * v * r_diff, 2.0 * v * v, -2.0 * r_diff ** 2, 0.0, 2.0 * v_b * v_b],
    ])


def omega_alpha(stats: FrontierStats | EstimatedStats, c: float,
                variant: OmegaVariant, gamma: float | None = None) -> OmegaAlpha:
    """Limiting covariance of the scaled frontier-statistic errors.

    ``POPULATION`` takes population characteristics, ``HAT`` the consistent
    sample versions. ``TILDE`` is the variant valid under the null that the
    target is EU optimal: it substitutes ``gamma * (target mean - minimum
    variance mean)`` for the corrected slope, so ``gamma`` is required.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError(f"concentration ratio must lie in [0, 1), got {c!r}")
    if variant is OmegaVariant.POPULATION:
        if not isinstance(stats, FrontierStats):
            raise TypeError("POPULATION variant needs population frontier statistics")
        om = _omega_entries(stats.v_gmv, stats.s, stats.r_b - stats.r_gmv, stats.v_b, c)
    elif variant is OmegaVariant.HAT:
        if not isinstance(stats, EstimatedStats):
            raise TypeError("HAT variant needs estimated statistics")
        om = _omega_entries(stats.v_c_hat, stats.s_c_hat,
                            stats.r_b_hat - stats.r_gmv_hat, stats.v_b_hat, c)
    elif variant is OmegaVariant.TILDE:
        if not isinstance(stats, EstimatedStats):
            raise TypeError("TILDE variant needs estimated statistics")
        if gamma is None or not math.isfinite(float(gamma)):
            raise ValueError("TILDE variant requires finite risk aversion")
        r_diff = stats.r_b_hat - stats.r_gmv_hat
        om = _omega_entries(stats.v_c_hat, float(gamma) * r_diff, r_diff, stats.v_b_hat, c)
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown variant {variant!r}")
    return OmegaAlpha(omega=om, variant=variant)


def intensity_variance(decomp: IntensityDecomposition, sens: SensitivityVector,
                       omega: OmegaAlpha) -> float:
    """Asymptotic variance of the estimated intensity: d' Omega d / B^2.

    Results in [-1e-10, 0] are rounded to zero; anything more negative
    signals inconsistent inputs and raises :class:`NegativeVariance`.
    """
    value = float(sens.d @ omega.omega @ sens.d) / (decomp.b_den ** 2)
    if value < -TOL.variance_clamp:
        raise NegativeVariance(f"variance formula produced {value!r}")
    return max(value, 0.0)


def gmv_intensity_variance(frontier: FrontierStats, c: float, *, denominator: str) -> float:
    """Asymptotic variance of the intensity for the fully risk-averse investor.

    Two readings of the fourth-power denominator are available and must be
    chosen explicitly: ``"variance_ratio"`` uses ``(1-c) L + c`` with
    ``L = v_b / v_gmv - 1`` (the delta-method value), ``"mean_return"`` uses
    ``(1-c) r_b + c``. The Monte Carlo validation harness reports which
    reading matches simulation.
    """
    if not 0.0 < c < 1.0:
        raise ValueError(f"concentration ratio must lie in (0, 1), got {c!r}")
    lb = frontier.v_b / frontier.v_gmv - 1.0
    if denominator == "variance_ratio":
        base = (1.0 - c) * lb + c
    elif denominator == "mean_return":
        base = (1.0 - c) * frontier.r_b + c
    else:
        raise ValueError("denominator must be 'variance_ratio' or 'mean_return'")
    if base == 0.0:
        raise ZeroDenominator("variance denominator vanishes")
    num = 2.0 * (1.0 - c) * c * c * (lb + 1.0) * ((2.0 - c) * lb + c)
    return num / base ** 4
