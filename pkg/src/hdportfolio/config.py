"""Numerical tolerances shared across the package.

All comparison thresholds live in one frozen record so that tests and library
code agree on what "zero" means for each kind of check.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # relative asymmetry allowed before a matrix is rejected as non-symmetric
    symmetry_rel: float = 1e-12
    # relative asymmetry silently symmetrized away inside test statistics
    statistic_symmetry_rel: float = 1e-8
    # |Q @ 1| relative to ||Q|| for budget-constraint projections
    projection_rel: float = 1e-10
    # deviation of portfolio weight sums from one
    weight_sum_abs: float = 1e-10
    # |s_c| below which slope-dependent quantities are refused
    slope_epsilon: float = 1e-10
    # |denominator| relative to the magnitude of its summands
    denominator_rel: float = 1e-10
    # variances in [-clamp, 0] are rounded up to zero; below -clamp is an error
    variance_clamp: float = 1e-10
    # unit-norm requirement for direction vectors
    unit_norm_abs: float = 1e-10


TOL = Tolerances()
