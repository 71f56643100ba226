"""Posterior of a gene's true mean log ratio under a three-normal mixture prior.

Observation model: ``y_i | theta_i ~ N(theta_i, sigma2_i)`` with known
``sigma2_i``; prior ``theta_i ~ sum_j pi_j N(mu_j, tau2_j)``.  The posterior is
again a normal mixture with components ``N(E_j, D2_j)`` where

    D2_j = sigma2 tau2_j / (tau2_j + sigma2)
    E_j  = (y tau2_j + mu_j sigma2) / (tau2_j + sigma2)

and weights proportional to ``pi_j N(y; mu_j, sigma2 + tau2_j)``.  Weights are
combined in log space, so components with ``tau2_j`` near (or exactly) zero are
handled without overflow; ``tau2_j == 0`` is an exact point mass at ``mu_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .stats import EquivalenceSpec, interval_probability

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GeneObservation:
    """Summary statistics of one gene: mean log ratio and its known variance."""

    id: str
    y: float
    sigma2: float
    spot_type: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.y):
            raise ValueError(f"gene {self.id!r}: mean log ratio must be finite")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"gene {self.id!r}: variance must be positive, got {self.sigma2!r}")


@dataclass(frozen=True)
class MixturePrior:
    """Three-component normal mixture prior ``sum_j pi_j N(mu_j, tau2_j)``."""

    weights: Tuple[float, float, float]
    means: Tuple[float, float, float]
    variances: Tuple[float, float, float]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        m = tuple(float(v) for v in self.means)
        v2 = tuple(float(v) for v in self.variances)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v2)
        if not (len(w) == len(m) == len(v2)):
            raise ValueError("weights, means and variances must have equal length")
        if any(not (x >= 0 and math.isfinite(x)) for x in w):
            raise ValueError(f"weights must be nonnegative, got {w}")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got sum={math.fsum(w)!r}")
        if any(not math.isfinite(x) for x in m):
            raise ValueError(f"means must be finite, got {m}")
        if any(not (x >= 0 and math.isfinite(x)) for x in v2):
            raise ValueError(f"variances must be nonnegative, got {v2}")

    @classmethod
    def normalized(cls, weights, means, variances) -> "MixturePrior":
        """Build a prior, rescaling ``weights`` to sum to one (e.g. rounded tables)."""
        w = [float(x) for x in weights]
        total = math.fsum(w)
        if total <= 0:
            raise ValueError("weights must have positive sum")
        return cls(tuple(x / total for x in w), tuple(means), tuple(variances))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self.weights, dtype=float),
            np.asarray(self.means, dtype=float),
            np.asarray(self.variances, dtype=float),
        )

    def permuted(self, order: Sequence[int]) -> "MixturePrior":
        return MixturePrior(
            tuple(self.weights[k] for k in order),
            tuple(self.means[k] for k in order),
            tuple(self.variances[k] for k in order),
        )

    def equivalence_mass(self, epsilon: float) -> float:
        """Prior probability of ``-epsilon < theta < epsilon``."""
        total = 0.0
        for w, mu, t2 in zip(self.weights, self.means, self.variances):
            if t2 == 0:
                total += w * (abs(mu) < epsilon)
            else:
                sd = math.sqrt(t2)
                total += w * interval_probability((-epsilon - mu) / sd, (epsilon - mu) / sd)
        return total


# Default prior, fitted to a two-colour array comparison.  The weights are
# rounded to four digits (they sum to 1.00007) and are renormalised here.
TABLE3_PRIOR = MixturePrior.normalized(
    (0.03177, 0.3576, 0.6107),
    (-0.09135, -0.01845, 0.008169),
    (0.3558, 0.01958, 5.426e-12),
)


@dataclass(frozen=True)
class PosteriorDecomposition:
    """Per-gene constants of the posterior mixture.

    ``a`` is the marginal density of ``y``; ``b``, ``c``, ``d2`` and ``e`` are
    the per-component constants with ``b_j c_j exp(e_j**2 / 2 d2_j)
    sqrt(2 pi d2_j) / a`` equal to ``mix_weights[j]``.  For a component with
    ``tau2_j == 0`` the constants ``b_j`` and ``c_j`` are infinite/zero and only
    the (log-space) ``mix_weights`` are meaningful.
    """

    a: float
    b: Tuple[float, ...]
    c: Tuple[float, ...]
    d2: Tuple[float, ...]
    e: Tuple[float, ...]
    mix_weights: Tuple[float, ...]

    def mean(self) -> float:
        return math.fsum(w * e for w, e in zip(self.mix_weights, self.e))

    def density(self, theta):
        """Posterior density at ``theta`` (point-mass components contribute 0)."""
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for w, e, d2 in zip(self.mix_weights, self.e, self.d2):
            if d2 > 0 and w > 0:
                out = out + w * np.exp(-0.5 * (theta - e) ** 2 / d2 - 0.5 * (_LOG_2PI + math.log(d2)))
        return out


def _arrays(y, sigma2):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    y, sigma2 = np.broadcast_arrays(y, sigma2)
    if np.any(~(sigma2 > 0)) or np.any(~np.isfinite(sigma2)):
        raise ValueError("variances must be positive and finite")
    return y, sigma2


def log_component_densities(y, sigma2, prior: MixturePrior) -> np.ndarray:
    """``log(pi_j) + log N(y_i; mu_j, sigma2_i + tau2_j)`` as an ``(m, K)`` array."""
    y, sigma2 = _arrays(y, sigma2)
    pi, mu, tau2 = prior.as_arrays()
    rho2 = sigma2[:, None] + tau2[None, :]
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    return log_pi[None, :] - 0.5 * (_LOG_2PI + np.log(rho2)) - 0.5 * (y[:, None] - mu[None, :]) ** 2 / rho2


def posterior_components(y, sigma2, prior: MixturePrior):
    """Vectorised posterior mixture: ``(log_weights, E, D2, log_marginal)``.

    All returned arrays have one row per gene; ``log_marginal`` is 1-d.
    """
    y, sigma2 = _arrays(y, sigma2)
    _, mu, tau2 = prior.as_arrays()
    log_comp = log_component_densities(y, sigma2, prior)
    log_marg = logsumexp(log_comp, axis=1)
    log_w = log_comp - log_marg[:, None]
    rho2 = sigma2[:, None] + tau2[None, :]
    e = (y[:, None] * tau2[None, :] + mu[None, :] * sigma2[:, None]) / rho2
    d2 = sigma2[:, None] * tau2[None, :] / rho2
    return log_w, e, d2, log_marg


def equivalence_probabilities(y, sigma2, prior: MixturePrior, epsilon: float = 1.0) -> np.ndarray:
    """Posterior probability of ``-epsilon < theta_i < epsilon`` for every gene."""
    log_w, e, d2, _ = posterior_components(y, sigma2, prior)
    w = np.exp(log_w)
    d = np.sqrt(d2)
    point = d == 0
    safe_d = np.where(point, 1.0, d)
    inside = interval_probability((-epsilon - e) / safe_d, (epsilon - e) / safe_d)
    inside = np.where(point, (np.abs(e) < epsilon).astype(float), inside)
    p = np.sum(w * inside, axis=1)
    return np.clip(p, 0.0, 1.0)


def marginal_density(obs: GeneObservation, prior: MixturePrior) -> float:
    """Marginal density ``f(y) = sum_j pi_j N(y; mu_j, sigma2 + tau2_j)``."""
    return float(np.exp(logsumexp(log_component_densities(obs.y, obs.sigma2, prior)[0])))


def posterior_decomposition(obs: GeneObservation, prior: MixturePrior) -> PosteriorDecomposition:
    log_w, e, d2, log_marg = posterior_components(obs.y, obs.sigma2, prior)
    pi, mu, tau2 = prior.as_arrays()
    s2, y = obs.sigma2, obs.y
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b = pi / (np.sqrt(2 * np.pi * s2) * np.sqrt(2 * np.pi * tau2))
        c = np.exp(-(tau2 * y * y + s2 * mu * mu) / (2 * s2 * tau2))
    w = np.exp(log_w[0])
    w = w / w.sum()
    return PosteriorDecomposition(
        a=float(np.exp(log_marg[0])),
        b=tuple(float(v) for v in b),
        c=tuple(float(v) for v in c),
        d2=tuple(float(v) for v in d2[0]),
        e=tuple(float(v) for v in e[0]),
        mix_weights=tuple(float(v) for v in w),
    )


def posterior_equivalence_probability(
    obs: GeneObservation, prior: MixturePrior, spec: EquivalenceSpec
) -> float:
    return float(equivalence_probabilities(obs.y, obs.sigma2, prior, spec.epsilon)[0])


def equivalence_curve(
    y: float, prior: MixturePrior, spec: EquivalenceSpec, sigma2_grid: Iterable[float]
) -> List[Tuple[float, float]]:
    """Posterior probability of equivalence over a grid of variances, ``y`` fixed."""
    grid = np.asarray([float(s) for s in sigma2_grid], dtype=float)
    if grid.size == 0:
        raise ValueError("sigma2_grid must be nonempty")
    if np.any(~(grid > 0)):
        raise ValueError("sigma2_grid entries must be positive")
    p = equivalence_probabilities(np.full_like(grid, y), grid, prior, spec.epsilon)
    return list(zip(grid.tolist(), p.tolist()))
