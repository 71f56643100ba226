"""Scalar primitives for equivalence testing of a normally distributed estimate.

An estimate ``theta_hat ~ N(theta, se**2)`` with known standard error is tested
for equivalence ``|theta| < epsilon`` against the null ``|theta| >= epsilon``.
The P-value returned by :func:`equivalence_p_value` is provided for comparison
only: it is not monotone in the standard error and tends to zero as the
standard error grows, so it should not be used to rank evidence for
equivalence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import ndtr

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EquivalenceSpec:
    """Equivalence margin ``epsilon`` and optional observation window ``ell``.

    ``ell`` is only used when conditioning on ``-ell < T < ell`` (see
    :mod:`eqpost.verify`).
    """

    epsilon: float = 1.0
    ell: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.ell is not None and not (0 < self.ell < self.epsilon):
            raise ValueError(
                f"ell must satisfy 0 < ell < epsilon, got ell={self.ell!r}, "
                f"epsilon={self.epsilon!r}"
            )


@dataclass(frozen=True)
class EstimateSummary:
    """An observed estimate and its (known) standard error."""

    theta_hat: float
    se: float

    def __post_init__(self):
        if not (math.isfinite(self.se) and self.se > 0):
            raise ValueError(f"se must be positive and finite, got {self.se!r}")
        if not math.isfinite(self.theta_hat):
            raise ValueError(f"theta_hat must be finite, got {self.theta_hat!r}")


def normal_cdf(z: float) -> float:
    """Standard normal CDF.

    Evaluated through the complementary error function, which keeps full
    relative precision in the lower tail (absolute error well below 1e-15).
    """
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_sf(z: float) -> float:
    """Upper tail ``1 - Phi(z)`` without cancellation."""
    return 0.5 * math.erfc(z / _SQRT2)


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z - _LOG_SQRT_2PI)


def interval_probability(lo, hi):
    """``Phi(hi) - Phi(lo)`` for ``lo <= hi``, accurate when both are in one tail.

    Works elementwise on arrays.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # use whichever tail keeps both terms small
    upper = lo > 0
    lower = hi < 0
    out = np.where(
        upper,
        ndtr(-lo) - ndtr(-hi),
        np.where(lower, ndtr(hi) - ndtr(lo), 1.0 - ndtr(lo) - ndtr(-hi)),
    )
    out = np.clip(out, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def test_statistic_u(est: EstimateSummary, spec: EquivalenceSpec) -> float:
    """``(epsilon - |theta_hat|) / se``; large values favour equivalence."""
    return (spec.epsilon - abs(est.theta_hat)) / est.se


def equivalence_p_value(est: EstimateSummary, spec: EquivalenceSpec) -> float:
    """Equivalence P-value, the null probability maximised at ``theta = +-epsilon``.

    Equals ``Phi((|t| - eps)/se) - Phi((-|t| - eps)/se)`` for observed ``t``.
    """
    t = abs(est.theta_hat)
    return interval_probability((-t - spec.epsilon) / est.se, (t - spec.epsilon) / est.se)


def power_function(c: float, theta: float, se: float, spec: EquivalenceSpec) -> float:
    """Rejection probability of the region ``(-c, c)`` at the null boundary.

    This is ``P(-c < theta_hat < c)`` when the true value sits at
    ``theta = epsilon`` (the least favourable null value), i.e. the size of
    the test.  It increases in ``c``, so its minimum over all regions that
    contain an observed ``theta_hat`` is attained at ``c = |theta_hat|`` and
    reproduces :func:`equivalence_p_value`.

    ``theta`` is accepted for signature symmetry with the observed estimate;
    the boundary evaluation does not depend on it.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c!r}")
    if not se > 0:
        raise ValueError(f"se must be positive, got {se!r}")
    return interval_probability((-c - spec.epsilon) / se, (c - spec.epsilon) / se)


def p_value_curve(
    theta_hat: float, spec: EquivalenceSpec, se_grid: Iterable[float]
) -> List[Tuple[float, float]]:
    """Equivalence P-value as a function of the standard error."""
    grid = [float(s) for s in se_grid]
    if not grid:
        raise ValueError("se_grid must be nonempty")
    bad = [s for s in grid if not (s > 0 and math.isfinite(s))]
    if bad:
        raise ValueError(f"se_grid entries must be positive, got {bad[:3]}")
    return [(s, equivalence_p_value(EstimateSummary(theta_hat, s), spec)) for s in grid]
