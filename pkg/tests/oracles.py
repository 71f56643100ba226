"""Reference implementations used only by the tests.

They take a different route from the package code: direct quadrature with
QUADPACK (``scipy.integrate.quad``) instead of the closed-form posterior,
``scipy.stats`` densities, extended precision through ``mpmath`` and brute
force enumeration.
"""

import math

import mpmath
import numpy as np
from scipy import integrate, optimize, stats


def normal_cdf_oracle(z):
    """Standard normal CDF by QUADPACK integration of the density."""
    f = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    if z <= 0:
        val, _ = integrate.quad(f, -math.inf, z, epsabs=1e-15, epsrel=1e-13)
        return val
    val, _ = integrate.quad(f, z, math.inf, epsabs=1e-15, epsrel=1e-13)
    return 1.0 - val


def p_value_oracle(theta_hat, se, eps):
    """Equivalence P-value in extended precision."""
    mpmath.mp.dps = 40
    t = abs(mpmath.mpf(theta_hat))
    se = mpmath.mpf(se)
    return float(mpmath.ncdf((t - eps) / se) - mpmath.ncdf((-t - eps) / se))


def power_oracle(c, se, eps):
    """``P(|T| <= c)`` for ``T ~ N(eps, se^2)`` by integrating the density."""
    val, _ = integrate.quad(lambda t: stats.norm.pdf(t, eps, se), -c, c, epsabs=1e-14, epsrel=1e-13)
    return val


_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _norm_logpdf(x, m, v):
    return -0.5 * (x - m) ** 2 / v - 0.5 * math.log(v) - _LOG_SQRT_2PI


def _component_integrals(y, s2, pi, mu, t2, eps):
    """``log`` of the joint integrals over ``(-eps, eps)`` and over the real line.

    The integrand ``pi N(y; theta, s2) N(theta; mu, t2)`` is a log-concave bump;
    its mode is found by root finding on the score and the integrals are taken
    in units of the bump's scale, relative to the value at the mode.
    """
    if pi == 0:
        return -math.inf, -math.inf
    if t2 == 0:
        log_mass = math.log(pi) + _norm_logpdf(y, mu, s2)
        return (log_mass if abs(mu) < eps else -math.inf), log_mass

    def logf(th):
        return math.log(pi) + _norm_logpdf(y, th, s2) + _norm_logpdf(th, mu, t2)

    def score(th):
        return (y - th) / s2 - (th - mu) / t2

    lo, hi = min(y, mu), max(y, mu)
    mode = lo if lo == hi else optimize.brentq(score, lo, hi, xtol=1e-300, rtol=1e-15)
    h = min(math.sqrt(s2), math.sqrt(t2))
    peak = logf(mode)
    half = 40.0

    def g(s):
        return math.exp(logf(mode + s * h) - peak)

    total, _ = integrate.quad(g, -half, half, epsabs=1e-12, epsrel=1e-10, limit=200)
    a = max((-eps - mode) / h, -half)
    b = min((eps - mode) / h, half)
    if b <= a:
        inside = 0.0
    else:
        inside, _ = integrate.quad(g, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
    log_scale = peak + math.log(h)
    return (log_scale + math.log(inside) if inside > 0 else -math.inf), log_scale + math.log(total)


def posterior_equivalence_oracle(y, s2, weights, means, variances, eps):
    """``P(-eps < theta < eps | y)`` by numerical integration of prior times likelihood."""
    num, den = [], []
    for pi, mu, t2 in zip(weights, means, variances):
        a, b = _component_integrals(y, s2, pi, mu, t2, eps)
        num.append(a)
        den.append(b)
    log_num = np.logaddexp.reduce(np.array(num))
    log_den = np.logaddexp.reduce(np.array(den))
    return float(math.exp(log_num - log_den))


def loglik_oracle(y, s2, weights, means, variances):
    """Observed-data log-likelihood in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    total = mpmath.mpf(0)
    for yi, si in zip(y, s2):
        dens = mpmath.mpf(0)
        for pi, mu, t2 in zip(weights, means, variances):
            v = mpmath.mpf(si) + mpmath.mpf(t2)
            dens += mpmath.mpf(pi) * mpmath.exp(-(mpmath.mpf(yi) - mu) ** 2 / (2 * v)) / mpmath.sqrt(2 * mpmath.pi * v)
        total += mpmath.log(dens)
    return float(total)


def variance_objective(y, s2, gamma, mu, t2):
    """``sum_i gamma_i log N(y_i; mu, s2_i + t2)`` with scipy densities."""
    return float(np.sum(gamma * stats.norm.logpdf(y, mu, np.sqrt(s2 + t2))))


def q_value_oracle(t, ps):
    """Mean of ``1 - p`` over ``p >= t``, with exact rational arithmetic."""
    from fractions import Fraction

    sel = [Fraction(1) - Fraction(p) for p in ps if p >= t]
    return float(sum(sel) / len(sel))
