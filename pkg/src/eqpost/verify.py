"""Numerical checks of the monotonicity results and of the P-value pathology.

* :func:`lemma1_check`: for a symmetric positive density ``f`` and intervals
  ``[a, b]`` inside ``(-ell, ell)`` and ``[c, d]`` of the same length with
  ``0 < c`` and ``d > ell``, the ``f``-weighted second moment over ``[a, b]``
  is smaller than over ``[c, d]``.
* :func:`theorem2_posterior` / :func:`theorem2_sweep`: with
  ``T | theta ~ N(theta, sigma2)``, ``P(|theta| < eps | |T| < ell)`` decreases
  in ``sigma2``.
* :func:`pathology_report`: equivalence P-value curves against the standard
  error, showing the interior maximum, equal P-values at very different
  standard errors, and decay to zero.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .panel import format_float
from .posterior import TABLE3_PRIOR, MixturePrior, equivalence_curve, equivalence_probabilities
from .qvalue import build_table
from .quadrature import integrate
from .stats import EquivalenceSpec, EstimateSummary, equivalence_p_value, interval_probability

TIE_SLACK = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / _SQRT_2PI


# ---------------------------------------------------------------------------
# Second-moment inequality


@dataclass(frozen=True)
class Lemma1Result:
    lhs: float
    rhs: float
    holds: bool
    case: int


def lemma1_case(a: float, b: float, c: float) -> int:
    """Which case of the proof a hypothesis-satisfying tuple falls into.

    The tuple is first reflected so that ``b > 0`` and ``|a| <= |b|``.
    Case 1: ``b <= c``; case 2: ``c < b`` and ``|a| <= c``; case 3: otherwise.
    """
    if b <= 0 or abs(a) > abs(b):
        a, b = -b, -a
    if b <= c:
        return 1
    if abs(a) <= c:
        return 2
    return 3


def second_moment_ratio(f: Callable, lo: float, hi: float, tol: float = 1e-10) -> float:
    num = integrate(lambda x: x * x * f(x), lo, hi, atol=tol * 1e-3, rtol=1e-13)
    den = integrate(f, lo, hi, atol=tol * 1e-3, rtol=1e-13)
    return num / den


def lemma1_check(
    f: Callable = std_normal_pdf,
    a: float = -0.2,
    b: float = 0.4,
    c: float = 0.6,
    d: float = 1.2,
    ell: float = 0.5,
    tol: float = 1e-10,
) -> Lemma1Result:
    """Compare the two weighted second moments; ``f`` must accept arrays."""
    if not (-ell < a < b < ell):
        raise ValueError(f"need -ell < a < b < ell, got a={a}, b={b}, ell={ell}")
    if not (c > 0 and d > ell):
        raise ValueError(f"need c > 0 and d > ell, got c={c}, d={d}, ell={ell}")
    if not math.isclose(b - a, d - c, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"intervals must have equal length: b-a={b - a}, d-c={d - c}")
    lhs = second_moment_ratio(f, a, b, tol)
    rhs = second_moment_ratio(f, c, d, tol)
    return Lemma1Result(lhs, rhs, lhs < rhs, lemma1_case(a, b, c))


def sample_lemma1_tuple(rng: np.random.Generator, case: int):
    """Rejection-sample ``(a, b, c, d, ell)`` satisfying the hypotheses in ``case``."""
    while True:
        ell = rng.uniform(0.1, 3.0)
        a, b = np.sort(rng.uniform(-ell, ell, size=2))
        if b <= 0 or abs(a) > b or b - a < 1e-3 * ell:
            continue
        length = b - a
        c_min = max(0.0, ell - length)
        if case == 1:
            c = rng.uniform(max(b, c_min), max(b, c_min) + 2.0)
        else:
            if c_min >= b:
                continue
            c = rng.uniform(c_min, b)
        d = c + length
        if not (c > 0 and d > ell):
            continue
        if lemma1_case(a, b, c) != case:
            continue
        return float(a), float(b), float(c), float(d), float(ell)


def lemma1_random_suite(n: int = 1000, seed: int = 0, f: Callable = std_normal_pdf) -> List[Lemma1Result]:
    """``n`` random tuples, cycling through the three cases."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        a, b, c, d, ell = sample_lemma1_tuple(rng, k % 3 + 1)
        # random reflection so that negative-b tuples are also exercised
        if rng.random() < 0.5:
            a, b = -b, -a
        out.append(lemma1_check(f, a, b, c, d, ell))
    return out


# ---------------------------------------------------------------------------
# Conditional probability of equivalence


@dataclass(frozen=True)
class DiscretePrior:
    atoms: Tuple[float, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        atoms = tuple(float(x) for x in self.atoms)
        weights = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        if len(atoms) != len(weights) or not atoms:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    def equivalence_mass(self, epsilon: float) -> float:
        return math.fsum(w for x, w in zip(self.atoms, self.weights) if abs(x) < epsilon)


IntervalPrior = Union[MixturePrior, DiscretePrior]


def _window_probability(theta, ell: float, sigma: float):
    """``P(-ell < T < ell | theta)`` for ``T ~ N(theta, sigma**2)``."""
    theta = np.asarray(theta, dtype=float)
    return interval_probability((-ell - theta) / sigma, (ell - theta) / sigma)


def theorem2_masses(prior: IntervalPrior, spec: EquivalenceSpec, sigma2: float) -> Tuple[float, float]:
    """Joint probabilities of ``|T| < ell`` with ``theta`` inside / outside ``(-eps, eps)``."""
    if spec.ell is None:
        raise ValueError("the observation window ell must be set")
    return joint_masses(prior, spec.epsilon, spec.ell, sigma2)


def joint_masses(prior: IntervalPrior, eps: float, ell: float, sigma2: float) -> Tuple[float, float]:
    """As :func:`theorem2_masses` but without requiring ``ell < eps``."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    sigma = math.sqrt(sigma2)
    if isinstance(prior, DiscretePrior):
        atoms = np.asarray(prior.atoms)
        w = np.asarray(prior.weights) * _window_probability(atoms, ell, sigma)
        inside = np.abs(atoms) < eps
        return math.fsum(w[inside]), math.fsum(w[~inside])

    # g(theta) is at most min(1, 2 ell / (sigma sqrt(2 pi))); scale the absolute tolerance to it
    g_scale = min(1.0, 2.0 * ell / (sigma * _SQRT_2PI))
    inside = outside = 0.0
    for pi, mu, tau2 in zip(prior.weights, prior.means, prior.variances):
        if pi == 0:
            continue
        if tau2 == 0:
            g = float(_window_probability(mu, ell, sigma))
            if abs(mu) < eps:
                inside += pi * g
            else:
                outside += pi * g
            continue
        tau = math.sqrt(tau2)
        lo, hi = mu - 10 * tau, mu + 10 * tau

        def h(t, mu=mu, tau=tau):
            return std_normal_pdf((t - mu) / tau) / tau * _window_probability(t, ell, sigma)

        kinks = (-ell, ell, mu)
        atol = 1e-14 * g_scale
        pieces = [(max(lo, -eps), min(hi, eps), True), (lo, min(hi, -eps), False), (max(lo, eps), hi, False)]
        for a, b, is_inside in pieces:
            if b <= a:
                continue
            val = pi * integrate(h, a, b, atol=atol, rtol=1e-12, points=kinks)
            if is_inside:
                inside += val
            else:
                outside += val
    return inside, outside


def _check_mass_condition(prior: IntervalPrior, epsilon: float):
    mass = prior.equivalence_mass(epsilon)
    if not 0.0 < mass < 1.0:
        raise ValueError(
            f"prior mass inside (-{epsilon}, {epsilon}) must be strictly between 0 and 1, got {mass}"
        )


def theorem2_posterior(prior: IntervalPrior, spec: EquivalenceSpec, sigma2: float) -> float:
    """``P(-eps < theta < eps | -ell < T < ell)`` for ``T | theta ~ N(theta, sigma2)``."""
    _check_mass_condition(prior, spec.epsilon)
    inside, outside = theorem2_masses(prior, spec, sigma2)
    if inside + outside == 0:
        raise ValueError(f"P(-ell < T < ell) underflows to zero at sigma2={sigma2}")
    return inside / (inside + outside)


@dataclass
class Theorem2Sweep:
    points: List[Tuple[float, float]]
    decreasing: bool
    near_ties: List[int] = field(default_factory=list)
    odds: List[float] = field(default_factory=list)
    odds_nondecreasing_in_omega: bool = True


def theorem2_sweep(prior: IntervalPrior, spec: EquivalenceSpec, sigma2_grid: Sequence[float]) -> Theorem2Sweep:
    """Evaluate on an ascending grid and test for decrease (with ``1e-10`` slack).

    ``near_ties`` lists indices ``k`` where consecutive values differ by less
    than the slack.  The posterior odds are also reported; as a function of
    ``omega = 1 / (2 sigma2)`` they must be nondecreasing.
    """
    grid = [float(s) for s in sigma2_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sigma2_grid must be nonempty and strictly ascending")
    _check_mass_condition(prior, spec.epsilon)
    points, odds = [], []
    for s2 in grid:
        inside, outside = theorem2_masses(prior, spec, s2)
        points.append((s2, inside / (inside + outside)))
        odds.append(inside / outside if outside > 0 else math.inf)
    diffs = [q - p for (_, p), (_, q) in zip(points, points[1:])]
    decreasing = all(d <= TIE_SLACK for d in diffs)
    near_ties = [k for k, d in enumerate(diffs) if abs(d) <= TIE_SLACK]
    # grid ascending in sigma2 means descending in omega
    odds_ok = all(
        r_small_omega <= r_big_omega * (1 + TIE_SLACK) or r_big_omega == math.inf
        for r_big_omega, r_small_omega in zip(odds, odds[1:])
    )
    return Theorem2Sweep(points, decreasing, near_ties, odds, odds_ok)


LIMIT_SIGMA2 = (1e-8, 1e10)


def theorem2_limits(prior: IntervalPrior, spec: EquivalenceSpec):
    """``(value near sigma2 -> 0, its limit, value near sigma2 -> inf, its limit)``.

    As the noise vanishes only ``|theta| < ell`` can produce ``|T| < ell``, so
    the probability tends to 1 (given prior mass in ``(-ell, ell)``); as it
    grows the conditioning becomes uninformative and the prior mass inside
    ``(-eps, eps)`` is recovered.  The small-noise pair is ``(nan, nan)`` when
    the prior puts less than ``1e-6`` mass in ``(-ell, ell)``, where the
    window probability underflows.
    """
    small, large = LIMIT_SIGMA2
    if prior.equivalence_mass(spec.ell) < 1e-6:
        low = low_limit = float("nan")
    else:
        low, low_limit = theorem2_posterior(prior, spec, small), 1.0
    return (
        low,
        low_limit,
        theorem2_posterior(prior, spec, large),
        prior.equivalence_mass(spec.epsilon),
    )


def limits_ok(prior: IntervalPrior, spec: EquivalenceSpec, tol: float = 1e-6) -> bool:
    lo, lo_lim, hi, hi_lim = theorem2_limits(prior, spec)
    low_ok = math.isnan(lo_lim) or abs(lo - lo_lim) <= tol
    return low_ok and abs(hi - hi_lim) <= tol


def random_mixture_prior(rng: np.random.Generator, max_components: int = 4) -> MixturePrior:
    k = int(rng.integers(1, max_components + 1))
    w = rng.dirichlet(np.ones(k))
    w = w / w.sum()
    means = rng.uniform(-3.0, 3.0, size=k)
    sds = rng.uniform(0.05, 2.0, size=k)
    return MixturePrior(tuple(w), tuple(means), tuple(sds ** 2))


def log_grid(lo: float, hi: float, n: int) -> List[float]:
    return np.logspace(math.log10(lo), math.log10(hi), n).tolist()


# ---------------------------------------------------------------------------
# P-value pathology

FIGURE1_THETAS = (0.5, 1.0, 2.0)
WITNESS_SE = (0.3, 8.28224)


def p_value_at(theta_hat: float, se: float, spec: EquivalenceSpec) -> float:
    return equivalence_p_value(EstimateSummary(theta_hat, se), spec)


def p_value_argmax(theta_hat: float, spec: EquivalenceSpec, lo: float = 1e-3, hi: float = 20.0):
    """Interior maximiser of the P-value over the standard error (``|theta_hat| < eps``)."""
    from .optimize import brent_maximize

    res = brent_maximize(lambda s: p_value_at(theta_hat, s, spec), lo, hi, xtol=1e-10, rtol=1e-10)
    return res.x, res.fun


def equal_p_partner(theta_hat: float, se: float, spec: EquivalenceSpec) -> float:
    """The other standard error on the opposite side of the maximum with the same P-value."""
    s_max, _ = p_value_argmax(theta_hat, spec)
    target = p_value_at(theta_hat, se, spec)

    def gap(s):
        return p_value_at(theta_hat, s, spec) - target

    if se < s_max:
        hi = s_max
        while gap(hi) > 0:
            hi *= 2.0
        return brentq(gap, s_max, hi, xtol=1e-12, rtol=1e-14)
    return brentq(gap, 1e-6, s_max, xtol=1e-12, rtol=1e-14)


def pathology_report(spec: EquivalenceSpec = EquivalenceSpec(1.0), se_grid: Optional[Sequence[float]] = None) -> Dict:
    """Curves of the equivalence P-value against the standard error plus assertions."""
    if se_grid is None:
        se_grid = np.round(np.arange(0.01, 20.0 + 1e-9, 0.01), 10).tolist()
    curves = {
        t: [(s, p_value_at(t, s, spec)) for s in se_grid] for t in FIGURE1_THETAS
    }
    argmax, pmax = p_value_argmax(0.5, spec)
    w1, w2 = (p_value_at(0.5, s, spec) for s in WITNESS_SE)
    partner = equal_p_partner(0.5, WITNESS_SE[0], spec)
    tail_se = (20.0, 40.0, 100.0, 1e3, 1e4)
    tail = {t: [(s, p_value_at(t, s, spec)) for s in tail_se] for t in FIGURE1_THETAS}

    def decreasing_beyond(t, start):
        vals = [p for s, p in curves[t] if s >= start]
        return all(q <= p for p, q in zip(vals, vals[1:]))

    assertions = {
        "interior_maximum_about_0.24": abs(pmax - 0.24) <= 0.01 and 0.01 < argmax < 20.0,
        "argmax_near_1": 0.5 < argmax < 1.5,
        "equal_p_witness": abs(w1 - w2) <= 5e-5,
        "witness_partner_root": abs(partner - WITNESS_SE[1]) <= 1e-3,
        "below_0.01_by_se_40": p_value_at(0.5, 40.0, spec) < 0.01,
        "decreasing_after_maximum": all(decreasing_beyond(t, max(argmax, 1e-9) if t == 0.5 else 0.0) for t in FIGURE1_THETAS),
        "tends_to_zero": all(pts[-1][1] < 1e-3 for pts in tail.values()),
    }
    return {
        "epsilon": spec.epsilon,
        "curves": curves,
        "maximum": {"theta_hat": 0.5, "se": argmax, "p": pmax},
        "witness": {"se": list(WITNESS_SE), "p": [w1, w2], "partner_se": partner},
        "tail": tail,
        "assertions": assertions,
    }


# ---------------------------------------------------------------------------
# Figure data and the full suite

FIGURE3_Y = (-3.5, -2.5, -1.5, -0.5, 0.0, 0.5, 1.5, 2.5, 3.5)


def figure1_csv(report: Dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_hat", "se", "p_value"])
    for t, pts in report["curves"].items():
        for s, p in pts:
            w.writerow([format_float(t), format_float(s), format_float(p)])
    return buf.getvalue()


def figure3_csv(prior: MixturePrior, spec: EquivalenceSpec, ys: Sequence[float] = FIGURE3_Y) -> str:
    grid = np.round(np.arange(0.0025, 2.5 + 1e-12, 0.0025), 10).tolist()
    grid = [1e-12] + grid
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mean_log_ratio", "variance", "p_equiv"])
    for y in ys:
        for s2, p in equivalence_curve(y, prior, spec, grid):
            w.writerow([format_float(y), format_float(s2), format_float(p)])
    return buf.getvalue()


def figure4_csv(panel, prior: MixturePrior, spec: EquivalenceSpec) -> str:
    p = equivalence_probabilities(panel.y, panel.sigma2, prior, spec.epsilon)
    table = build_table(list(zip(panel.ids, p.tolist())))
    return table.to_csv()


def run_suite(
    spec: EquivalenceSpec = EquivalenceSpec(1.0, 0.5),
    seed: int = 0,
    n_lemma: int = 1000,
    n_theorem: int = 200,
    grid_points: int = 20,
) -> Tuple[Dict[str, bool], Dict]:
    """Run every check; returns ``(verdicts, details)``."""
    ell = spec.ell if spec.ell is not None else 0.5 * spec.epsilon
    tspec = EquivalenceSpec(spec.epsilon, ell)
    verdicts: Dict[str, bool] = {}
    details: Dict = {}

    lemma = lemma1_random_suite(n_lemma, seed)
    per_case = {k: sum(1 for r in lemma if r.case == k) for k in (1, 2, 3)}
    verdicts["lemma1_random"] = all(r.holds for r in lemma)
    details["lemma1"] = {"n": len(lemma), "per_case": per_case, "failures": sum(not r.holds for r in lemma)}

    rng = np.random.default_rng(seed)
    grid = log_grid(1e-3, 1e3, grid_points)
    priors = [random_mixture_prior(rng) for _ in range(n_theorem)]
    sweeps = [theorem2_sweep(prior, tspec, grid) for prior in priors]
    verdicts["theorem2_random_decreasing"] = all(s.decreasing for s in sweeps)
    verdicts["theorem2_random_limits"] = all(limits_ok(prior, tspec) for prior in priors)
    verdicts["theorem2_random_odds"] = all(s.odds_nondecreasing_in_omega for s in sweeps)
    details["theorem2"] = {
        "n": len(sweeps),
        "grid": grid,
        "failures": sum(not s.decreasing for s in sweeps),
        "near_ties": sum(len(s.near_ties) for s in sweeps),
    }

    table3 = theorem2_sweep(TABLE3_PRIOR, tspec, grid)
    verdicts["theorem2_table3_decreasing"] = table3.decreasing
    details["theorem2_table3"] = table3.points

    two_atoms = DiscretePrior((0.0, 2.0), (0.5, 0.5))
    atoms = theorem2_sweep(two_atoms, tspec, [1e-4] + grid + [1e8])
    verdicts["theorem2_two_atoms"] = (
        atoms.decreasing
        and abs(atoms.points[0][1] - 1.0) <= 1e-6
        and abs(atoms.points[-1][1] - 0.5) <= 1e-6
    )
    details["theorem2_two_atoms"] = atoms.points

    report = pathology_report(EquivalenceSpec(spec.epsilon))
    for k, v in report["assertions"].items():
        verdicts[f"pathology_{k}"] = bool(v)
    details["pathology"] = {
        "maximum": report["maximum"],
        "witness": report["witness"],
    }
    return verdicts, {"report": report, **details}


def write_outputs(outdir: Union[str, Path], verdicts: Dict[str, bool], details: Dict, figure4: str,
                  prior: MixturePrior = TABLE3_PRIOR, spec: EquivalenceSpec = EquivalenceSpec(1.0)) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "figure1.csv").write_text(figure1_csv(details["report"]), encoding="utf-8")
    (out / "figure3.csv").write_text(figure3_csv(prior, spec), encoding="utf-8")
    (out / "figure4.csv").write_text(figure4, encoding="utf-8")
    sidecar = {
        "verdicts": verdicts,
        "all_passed": all(verdicts.values()),
        "lemma1": details.get("lemma1"),
        "theorem2": {k: v for k, v in details.get("theorem2", {}).items() if k != "grid"},
        "pathology": details.get("pathology"),
    }
    (out / "verdicts.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
