"""Empirical-Bayes estimation of the mixture prior by ECM.

Each iteration is one E-step followed by three conditional maximisations of
the expected complete-data log-likelihood, in this order:

1. weights ``pi_j``: column means of the responsibilities;
2. means ``mu_j``: precision-weighted means using the *previous* ``tau2_j``;
3. variances ``tau2_j``: bounded 1-D maximisation of
   ``sum_i gamma_ij log g_j(y_i, mu_j, tau2_j)`` using the *new* ``mu_j``.

Fits are started from several initial weight triples; each start is run for a
short screening phase and the best one (by observed log-likelihood) is iterated
to a tight tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .optimize import brent_maximize
from .panel import Panel, as_panel
from .posterior import MixturePrior, log_component_densities

log = logging.getLogger(__name__)

# Initial mixing proportions tried by default.  The first sums to 0.99; block
# sizes use the values as given and the initial weights are renormalised.
TABLE4_STARTS: Tuple[Tuple[float, float, float], ...] = (
    (0.33, 0.33, 0.33),
    (0.8, 0.1, 0.1),
    (0.1, 0.8, 0.1),
    (0.1, 0.1, 0.8),
    (0.1, 0.45, 0.45),
    (0.45, 0.1, 0.45),
    (0.45, 0.45, 0.1),
)


class DegenerateFitError(ArithmeticError):
    """A mixture component lost all support (empty block or zero responsibility)."""


@dataclass(frozen=True)
class FitConfig:
    screening_iters: int = 50
    screening_tol: float = 1e-5
    final_tol: float = 1e-10
    max_iters: int = 5000
    tau2_upper: Optional[float] = None  # None: max_i sigma2_i
    starts: Tuple[Tuple[float, float, float], ...] = TABLE4_STARTS

    def __post_init__(self):
        if self.screening_iters < 1 or self.max_iters < 1:
            raise ValueError("iteration counts must be positive")
        if not (0 < self.final_tol <= self.screening_tol):
            raise ValueError("need 0 < final_tol <= screening_tol")
        if self.tau2_upper is not None and not self.tau2_upper >= 0:
            raise ValueError("tau2_upper must be nonnegative")
        if not self.starts:
            raise ValueError("at least one start is required")
        starts = tuple(tuple(float(x) for x in s) for s in self.starts)
        for s in starts:
            if len(s) != 3 or any(x <= 0 for x in s) or abs(sum(s) - 1.0) > 0.02:
                raise ValueError(f"start weights must be three positive values summing to 1, got {s}")
        object.__setattr__(self, "starts", starts)


@dataclass
class FitResult:
    prior: MixturePrior
    log_likelihood: float
    iterations: int
    start_used: Tuple[float, float, float]
    converged: bool
    trace: List[float] = field(default_factory=list)
    screening: List[Tuple[Tuple[float, float, float], float]] = field(default_factory=list)


def observed_log_likelihood(data, prior: MixturePrior) -> float:
    """``sum_i log sum_j pi_j g_j(y_i, mu_j, tau2_j)``."""
    panel = as_panel(data)
    rows = logsumexp(log_component_densities(panel.y, panel.sigma2, prior), axis=1)
    if not np.all(np.isfinite(rows)):
        bad = int(np.flatnonzero(~np.isfinite(rows))[0])
        raise DegenerateFitError(f"mixture density underflows to zero for gene {panel.ids[bad]!r}")
    return math.fsum(rows)


def e_step(data, prior: MixturePrior) -> np.ndarray:
    """Responsibilities ``gamma_ij`` as an ``(m, 3)`` array with unit row sums."""
    panel = as_panel(data)
    lc = log_component_densities(panel.y, panel.sigma2, prior)
    rows = logsumexp(lc, axis=1)
    if not np.all(np.isfinite(rows)):
        bad = int(np.flatnonzero(~np.isfinite(rows))[0])
        raise DegenerateFitError(f"mixture density underflows to zero for gene {panel.ids[bad]!r}")
    return np.exp(lc - rows[:, None])


def cm_step_weights(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    return gamma.sum(axis=0) / gamma.sum()


def cm_step_means(data, gamma, tau2_prev) -> np.ndarray:
    panel = as_panel(data)
    gamma = np.asarray(gamma, dtype=float)
    prec = gamma / (panel.sigma2[:, None] + np.asarray(tau2_prev, dtype=float)[None, :])
    den = prec.sum(axis=0)
    if np.any(~(den > 0)):
        j = int(np.flatnonzero(~(den > 0))[0])
        raise DegenerateFitError(f"component {j + 1} has zero responsibility mass")
    return (prec * panel.y[:, None]).sum(axis=0) / den


def _variance_objective(gamma_j, r2, sigma2, ref):
    """``Q_j(t) - Q_j(ref)`` for the variance CM step, evaluated without cancellation."""
    a = sigma2 + ref

    def q(t):
        d = t - ref
        return float(np.dot(gamma_j, -0.5 * np.log1p(d / a) + 0.5 * r2 * d / (a * (a + d))))

    return q


def maximize_variance(y, sigma2, weights, mu: float, upper: float, ref: Optional[float] = None) -> float:
    """Maximiser over ``[0, upper]`` of ``sum_i w_i log N(y_i; mu, t + sigma2_i)``.

    The objective is evaluated relative to ``ref`` (default 0); if the search
    ends below the value at ``ref`` (possible when the objective is not
    unimodal), ``ref`` is returned, so the step never decreases the objective.
    """
    y = np.asarray(y, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    weights = np.asarray(weights, dtype=float)
    start = 0.0 if ref is None else float(ref)
    q = _variance_objective(weights, (y - mu) ** 2, sigma2, start)
    res = brent_maximize(q, 0.0, float(upper))
    if ref is not None and res.fun < 0.0:
        return start
    return res.x


def cm_step_variances(data, gamma, mu_next, tau2_upper: float, tau2_prev=None) -> np.ndarray:
    panel = as_panel(data)
    gamma = np.asarray(gamma, dtype=float)
    out = np.empty(gamma.shape[1])
    for j in range(gamma.shape[1]):
        ref = None if tau2_prev is None else min(float(tau2_prev[j]), tau2_upper)
        out[j] = maximize_variance(panel.y, panel.sigma2, gamma[:, j], float(mu_next[j]), tau2_upper, ref)
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def block_sizes(m: int, start_weights: Sequence[float]) -> Tuple[int, int, int]:
    n1 = _round_half_up(m * start_weights[0])
    n2 = _round_half_up(m * start_weights[1])
    return n1, n2, m - n1 - n2


def initialize(data, start_weights: Sequence[float], tau2_upper: Optional[float] = None) -> MixturePrior:
    """Starting values from sorted blocks of genes.

    Genes are ordered by ``y`` and split into consecutive blocks of sizes
    ``round(m pi_1)``, ``round(m pi_2)`` and the remainder.  Each block gives
    ``mu_j`` (sample mean) and ``tau2_j`` (maximum-likelihood variance with
    ``mu_j`` fixed, searched over ``[0, block max sigma2]`` unless
    ``tau2_upper`` is given).
    """
    panel = as_panel(data)
    m = len(panel)
    sizes = block_sizes(m, start_weights)
    if min(sizes) <= 0:
        raise DegenerateFitError(f"start {tuple(start_weights)} gives an empty block for m={m}: {sizes}")
    order = np.argsort(panel.y, kind="stable")
    y = panel.y[order]
    s2 = panel.sigma2[order]
    bounds = np.cumsum((0,) + sizes)
    means, variances = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        yb, sb = y[lo:hi], s2[lo:hi]
        mu = math.fsum(yb) / yb.size
        upper = float(sb.max()) if tau2_upper is None else float(tau2_upper)
        means.append(mu)
        variances.append(maximize_variance(yb, sb, np.ones_like(yb), mu, upper))
    return MixturePrior.normalized(start_weights, means, variances)


def _param_vector(prior: MixturePrior) -> np.ndarray:
    return np.array(prior.weights + prior.means + prior.variances)


def ecm_iteration(data, prior: MixturePrior, tau2_upper: float) -> MixturePrior:
    """One E-step followed by the weight, mean and variance CM steps."""
    panel = as_panel(data)
    gamma = e_step(panel, prior)
    pi = cm_step_weights(gamma)
    mu = cm_step_means(panel, gamma, prior.variances)
    tau2 = cm_step_variances(panel, gamma, mu, tau2_upper, prior.variances)
    return MixturePrior(tuple(pi / math.fsum(pi)), tuple(mu), tuple(tau2))


def run_ecm(data, prior: MixturePrior, tau2_upper: float, tol: float, max_steps: int):
    """Iterate from ``prior`` until the largest parameter change is below ``tol``.

    Returns ``(prior, trace, steps, converged)``; ``trace`` holds the observed
    log-likelihood after each step.
    """
    panel = as_panel(data)
    trace = []
    converged = False
    steps = 0
    while steps < max_steps:
        new = ecm_iteration(panel, prior, tau2_upper)
        steps += 1
        trace.append(observed_log_likelihood(panel, new))
        delta = float(np.max(np.abs(_param_vector(new) - _param_vector(prior))))
        prior = new
        if delta < tol:
            converged = True
            break
    return prior, trace, steps, converged


def fit(data, config: FitConfig = FitConfig()) -> FitResult:
    """Multi-start ECM fit of the three-component prior."""
    panel = as_panel(data)
    if len(panel) < 3:
        raise ValueError(f"need at least 3 genes to fit, got {len(panel)}")
    upper = float(panel.sigma2.max()) if config.tau2_upper is None else float(config.tau2_upper)

    best = None
    screening = []
    for start in config.starts:
        try:
            init = initialize(panel, start, config.tau2_upper)
            ll0 = observed_log_likelihood(panel, init)
            prior, trace, steps, _ = run_ecm(panel, init, upper, config.screening_tol, config.screening_iters)
        except DegenerateFitError as exc:
            log.warning("start %s skipped: %s", start, exc)
            continue
        ll = trace[-1]
        screening.append((start, ll))
        log.info("start %s: loglik %.6f after %d steps", start, ll, steps)
        if best is None or ll > best[1]:
            best = (start, ll, prior, [ll0] + trace, steps)
    if best is None:
        raise DegenerateFitError("every start failed")

    start, _, prior, trace, steps = best
    prior, final_trace, final_steps, converged = run_ecm(
        panel, prior, upper, config.final_tol, config.max_iters
    )
    if not converged:
        log.warning("no convergence to %g within %d iterations", config.final_tol, config.max_iters)
    return FitResult(
        prior=prior,
        log_likelihood=final_trace[-1],
        iterations=steps + final_steps,
        start_used=start,
        converged=converged,
        trace=trace + final_trace,
        screening=screening,
    )
