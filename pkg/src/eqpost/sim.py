"""Synthetic panels with known truth, and q-value calibration experiments.

Random numbers come from the Philox4x64-10 counter-based generator keyed by
the scenario seed (numpy's ``Philox(key=seed)``).  Gene ``i`` uses counter
block ``i``, i.e. exactly the four 64-bit words ``4i .. 4i+3`` of the stream,
each mapped to a uniform in (0, 1) by ``((w >> 11) + 0.5) * 2**-53``:

    word 0 -> mixture component (inverse CDF of the weights)
    word 1 -> theta_i = mu_j + tau_j * Phi^-1(u)
    word 2 -> sigma2_i from the variance law
    word 3 -> y_i = theta_i + sigma_i * Phi^-1(u)

Any slice of genes can therefore be generated independently and the panel is
identical however it is partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtri

from .em import FitConfig, fit
from .panel import Panel
from .posterior import MixturePrior, equivalence_probabilities
from .qvalue import q_value_at


@dataclass(frozen=True)
class Sigma2Law:
    """Per-gene variance law: ``constant``, ``uniform`` or ``empirical``."""

    kind: str
    values: Tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.kind == "constant":
            ok = len(vals) == 1 and vals[0] > 0
        elif self.kind == "uniform":
            ok = len(vals) == 2 and 0 < vals[0] <= vals[1]
        elif self.kind == "empirical":
            ok = len(vals) >= 1 and all(v > 0 for v in vals)
        else:
            raise ValueError(f"unknown variance law {self.kind!r}")
        if not ok or not all(math.isfinite(v) for v in vals):
            raise ValueError(f"invalid parameters for {self.kind} variance law: {vals}")

    @classmethod
    def parse(cls, text: str) -> "Sigma2Law":
        """Parse ``constant:0.05``, ``uniform:0.01,0.1`` or ``empirical:0.01,0.02,...``."""
        kind, _, rest = text.partition(":")
        try:
            values = [float(v) for v in rest.split(",") if v.strip()]
        except ValueError:
            raise ValueError(f"cannot parse variance law {text!r}") from None
        return cls(kind.strip(), tuple(values))

    def draw(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(u, self.values[0])
        if self.kind == "uniform":
            lo, hi = self.values
            return lo + (hi - lo) * u
        vals = np.asarray(self.values)
        idx = np.minimum((u * vals.size).astype(np.int64), vals.size - 1)
        return vals[idx]


@dataclass(frozen=True)
class SimScenario:
    m: int
    prior: MixturePrior
    sigma2_law: Sigma2Law
    seed: int
    epsilon: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class SimulatedPanel:
    panel: Panel
    theta: np.ndarray
    equivalent: np.ndarray
    component: np.ndarray

    @property
    def truth(self) -> List[Tuple[float, bool]]:
        return list(zip(self.theta.tolist(), self.equivalent.tolist()))


def _uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    bits = np.random.Philox(key=seed)
    if start:
        bits.advance(start)
    raw = bits.random_raw(4 * (stop - start)).reshape(-1, 4)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def simulate(scn: SimScenario, start: int = 0, stop: Optional[int] = None) -> SimulatedPanel:
    """Draw genes ``start .. stop-1`` (default: the whole panel) of a scenario."""
    stop = scn.m if stop is None else stop
    if not 0 <= start <= stop <= scn.m:
        raise ValueError(f"invalid gene range [{start}, {stop}) for m={scn.m}")
    u = _uniforms(scn.seed, start, stop)
    pi, mu, tau2 = scn.prior.as_arrays()
    cum = np.cumsum(pi)
    cum[-1] = 1.0
    comp = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), pi.size - 1)
    theta = mu[comp] + np.sqrt(tau2[comp]) * ndtri(u[:, 1])
    sigma2 = scn.sigma2_law.draw(u[:, 2])
    y = theta + np.sqrt(sigma2) * ndtri(u[:, 3])
    width = len(str(scn.m - 1))
    ids = tuple(f"g{i:0{width}d}" for i in range(start, stop))
    return SimulatedPanel(
        panel=Panel(ids, y, sigma2),
        theta=theta,
        equivalent=np.abs(theta) < scn.epsilon,
        component=comp,
    )


@dataclass(frozen=True)
class CalibrationRow:
    threshold: float
    q_hat: float
    fdp: float
    discoveries: int
    false_discoveries: int

    @property
    def bound(self) -> float:
        """Three binomial standard errors of ``q_hat`` at this discovery count."""
        return 3.0 * math.sqrt(self.q_hat * (1.0 - self.q_hat) / self.discoveries)

    @property
    def within_bound(self) -> bool:
        return abs(self.q_hat - self.fdp) < self.bound


def calibration_experiment(
    scn: SimScenario,
    thresholds: Sequence[float],
    scoring: Union[str, MixturePrior] = "oracle",
    fit_config: Optional[FitConfig] = None,
) -> List[CalibrationRow]:
    """Compare estimated q-values with the realised false discovery proportion.

    ``scoring`` is ``"oracle"`` (score with the true prior), ``"fit"`` (score
    with a prior fitted to the simulated panel) or an explicit prior.
    Thresholds with no discoveries are omitted.
    """
    sim = simulate(scn)
    if isinstance(scoring, MixturePrior):
        prior = scoring
    elif scoring == "oracle":
        prior = scn.prior
    elif scoring == "fit":
        prior = fit(sim.panel, fit_config or FitConfig()).prior
    else:
        raise ValueError(f"unknown scoring mode {scoring!r}")
    p = equivalence_probabilities(sim.panel.y, sim.panel.sigma2, prior, scn.epsilon)
    rows = []
    for t in thresholds:
        sel = p >= t
        r = int(sel.sum())
        if r == 0:
            continue
        v = int(np.sum(sel & ~sim.equivalent))
        rows.append(CalibrationRow(float(t), q_value_at(t, p[sel].tolist()), v / r, r, v))
    return rows
