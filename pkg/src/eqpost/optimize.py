"""Derivative-free bounded 1-D maximisation.

Brent's method: golden-section search accelerated by successive parabolic
interpolation, the same scheme as R's ``optimise``.  The interior search never
evaluates the interval ends, so both endpoints are checked afterwards; this
matters for variance parameters whose maximiser is frequently exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

_GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
_EPS = 2.0 ** -52


@dataclass
class ScalarMax:
    x: float
    fun: float
    nfev: int
    converged: bool


def brent_maximize(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-12,
    rtol: float = 4 * _EPS,
    maxiter: int = 500,
) -> ScalarMax:
    """Maximise ``f`` over ``[lo, hi]``.

    The interior search stops once the bracket is below
    ``2 * (rtol * |x| + xtol)``.  The larger of the interior optimum and the two
    endpoint values is returned.
    """
    if not hi >= lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if hi == lo:
        return ScalarMax(lo, f(lo), 1, True)

    def g(x):
        return -f(x)

    a, b = lo, hi
    x = w = v = a + _GOLDEN * (b - a)
    fx = fw = fv = g(x)
    nfev = 1
    d = e = 0.0
    converged = False
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        tol1 = rtol * abs(x) + xtol / 3.0
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            converged = True
            break
        golden = True
        if abs(e) > tol1:
            # parabola through (v, fv), (w, fw), (x, fx)
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if abs(p) < abs(0.5 * q * etemp) and q * (a - x) < p < q * (b - x):
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
                golden = False
        if golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLDEN * e
        u = x + (d if abs(d) >= tol1 else (tol1 if d > 0 else -tol1))
        fu = g(u)
        nfev += 1
        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, fv = w, fw
            w, fw = x, fx
            x, fx = u, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, fv = w, fw
                w, fw = u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    best_x, best_f = x, fx
    for end in (lo, hi):
        fe = g(end)
        nfev += 1
        if fe <= best_f:
            best_x, best_f = end, fe
    return ScalarMax(best_x, -best_f, nfev, converged)
