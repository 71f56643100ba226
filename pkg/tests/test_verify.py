import json
import math

import numpy as np
import pytest
from scipy import integrate, stats as sps

from eqpost import verify
from eqpost.posterior import TABLE3_PRIOR, MixturePrior
from eqpost.stats import EquivalenceSpec

SPEC = EquivalenceSpec(1.0, 0.5)


def masses_oracle(prior, eps, ell, s2):
    """Joint masses by QUADPACK over theta, window probability from scipy."""
    sd = math.sqrt(s2)

    def h(t):
        dens = sum(w * sps.norm.pdf(t, m, math.sqrt(v)) for w, m, v in zip(prior.weights, prior.means, prior.variances))
        return dens * (sps.norm.cdf((ell - t) / sd) - sps.norm.cdf((-ell - t) / sd))

    pts = [-ell, ell] + list(prior.means)
    inside, _ = integrate.quad(h, -eps, eps, points=[p for p in pts if -eps < p < eps], epsabs=1e-14, limit=200)
    left, _ = integrate.quad(h, -np.inf, -eps, epsabs=1e-14, limit=200)
    right, _ = integrate.quad(h, eps, np.inf, epsabs=1e-14, limit=200)
    return inside, left + right


class TestLemma1:
    def test_default_example(self):
        r = verify.lemma1_check()
        assert r.holds and r.lhs < r.rhs

    def test_second_moment_ratio(self):
        got = verify.second_moment_ratio(verify.std_normal_pdf, -1.0, 1.0)
        num, _ = integrate.quad(lambda x: x * x * sps.norm.pdf(x), -1, 1)
        den, _ = integrate.quad(sps.norm.pdf, -1, 1)
        assert got == pytest.approx(num / den, rel=1e-12)

    @pytest.mark.parametrize(
        "args",
        [
            dict(a=-0.6, b=0.4, c=0.6, d=1.6, ell=0.5),  # a outside window
            dict(a=-0.2, b=0.4, c=0.0, d=0.6, ell=0.5),  # c not positive
            dict(a=-0.2, b=0.4, c=0.1, d=0.4, ell=0.5),  # d inside window
            dict(a=-0.2, b=0.4, c=0.6, d=1.3, ell=0.5),  # unequal lengths
        ],
    )
    def test_hypotheses_enforced(self, args):
        with pytest.raises(ValueError):
            verify.lemma1_check(verify.std_normal_pdf, **args)

    @pytest.mark.parametrize(
        "a, b, c, case", [(-0.1, 0.3, 0.5, 1), (-0.1, 0.3, 0.2, 2), (-0.3, 0.35, 0.2, 3), (-0.3, 0.1, 0.2, 2)]
    )
    def test_case_labels(self, a, b, c, case):
        assert verify.lemma1_case(a, b, c) == case

    @pytest.mark.parametrize("case", [1, 2, 3])
    def test_sampler_respects_case(self, case):
        rng = np.random.default_rng(case)
        for _ in range(50):
            a, b, c, d, ell = verify.sample_lemma1_tuple(rng, case)
            assert -ell < a < b < ell and c > 0 and d > ell
            assert math.isclose(b - a, d - c, rel_tol=1e-9)
            assert verify.lemma1_case(a, b, c) == case

    def test_other_symmetric_density(self):
        # logistic density is symmetric and positive
        f = lambda x: np.exp(-np.abs(x)) / (1 + np.exp(-np.abs(x))) ** 2
        results = verify.lemma1_random_suite(60, seed=5, f=f)
        assert all(r.holds for r in results)


class TestTheorem2:
    @pytest.mark.parametrize("s2", [1e-3, 0.05, 1.0, 30.0, 1e3])
    def test_masses_against_quadpack(self, s2):
        prior = MixturePrior((0.3, 0.5, 0.2), (-1.2, 0.1, 2.0), (0.4, 0.05, 1.0))
        got = verify.theorem2_masses(prior, SPEC, s2)
        want = masses_oracle(prior, 1.0, 0.5, s2)
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-14)

    def test_two_atoms_closed_form(self):
        prior = verify.DiscretePrior((0.0, 2.0), (0.5, 0.5))
        for s2 in (0.01, 1.0, 100.0):
            sd = math.sqrt(s2)
            g0 = sps.norm.cdf(0.5 / sd) - sps.norm.cdf(-0.5 / sd)
            g2 = sps.norm.cdf((0.5 - 2) / sd) - sps.norm.cdf((-0.5 - 2) / sd)
            assert verify.theorem2_posterior(prior, SPEC, s2) == pytest.approx(g0 / (g0 + g2), rel=1e-12)

    def test_table3_sweep_decreasing(self):
        sweep = verify.theorem2_sweep(TABLE3_PRIOR, SPEC, verify.log_grid(1e-3, 1e3, 20))
        assert sweep.decreasing
        assert sweep.odds_nondecreasing_in_omega
        assert len(sweep.points) == 20

    def test_detects_non_decrease(self):
        # with ell > eps the conditioning can favour the outside; the monotonicity claim need not hold
        prior = MixturePrior((0.5, 0.5), (0.0, 1.5), (0.01, 0.01))
        vals = [
            (lambda m: m[0] / (m[0] + m[1]))(verify.joint_masses(prior, 1.0, 2.0, s2))
            for s2 in verify.log_grid(1e-3, 1.0, 10)
        ]
        assert any(b > a for a, b in zip(vals, vals[1:]))

    def test_large_window_recovers_prior_mass(self):
        for seed in range(10):
            prior = verify.random_mixture_prior(np.random.default_rng(seed))
            inside, outside = verify.joint_masses(prior, 1.0, 1e6, 0.5)
            assert inside == pytest.approx(prior.equivalence_mass(1.0), abs=1e-9)
            assert inside + outside == pytest.approx(1.0, abs=1e-9)

    def test_limits(self):
        lo, lo_lim, hi, hi_lim = verify.theorem2_limits(TABLE3_PRIOR, SPEC)
        assert abs(lo - lo_lim) <= 1e-6
        assert abs(hi - hi_lim) <= 1e-6

    def test_mass_condition(self):
        prior = verify.DiscretePrior((0.0,), (1.0,))
        with pytest.raises(ValueError, match="strictly between"):
            verify.theorem2_posterior(prior, SPEC, 1.0)

    def test_requires_window(self):
        with pytest.raises(ValueError):
            verify.theorem2_masses(TABLE3_PRIOR, EquivalenceSpec(1.0), 1.0)

    def test_grid_must_ascend(self):
        with pytest.raises(ValueError):
            verify.theorem2_sweep(TABLE3_PRIOR, SPEC, [1.0, 0.5])


@pytest.fixture(scope="module")
def report():
    return verify.pathology_report(EquivalenceSpec(1.0))


class TestPathology:
    def test_all_assertions(self, report):
        assert all(report["assertions"].values()), report["assertions"]

    def test_maximum(self, report):
        assert report["maximum"]["p"] == pytest.approx(0.24, abs=0.01)
        assert report["maximum"]["se"] == pytest.approx(0.954, abs=0.01)

    def test_partner_root(self, report):
        assert report["witness"]["partner_se"] == pytest.approx(8.28224, abs=1e-3)

    def test_partner_from_the_right(self):
        s = verify.equal_p_partner(0.5, 8.28224, EquivalenceSpec(1.0))
        assert s == pytest.approx(0.3, abs=1e-4)

    def test_curve_grid(self, report):
        curve = report["curves"][0.5]
        assert curve[0][0] == 0.01 and curve[-1][0] == 20.0


class TestOutputs:
    def test_suite_and_files(self, tmp_path):
        verdicts, details = verify.run_suite(SPEC, seed=1, n_lemma=30, n_theorem=5, grid_points=8)
        assert all(verdicts.values()), verdicts
        verify.write_outputs(tmp_path, verdicts, details, "gene_id,p_equiv,q_value\n")
        for name in ("figure1.csv", "figure3.csv", "figure4.csv", "verdicts.json"):
            assert (tmp_path / name).exists()
        data = json.loads((tmp_path / "verdicts.json").read_text())
        assert data["all_passed"] is True
        fig1 = (tmp_path / "figure1.csv").read_text().splitlines()
        assert fig1[0] == "theta_hat,se,p_value" and len(fig1) == 1 + 3 * 2000
        fig3 = (tmp_path / "figure3.csv").read_text().splitlines()
        assert fig3[0] == "mean_log_ratio,variance,p_equiv"
