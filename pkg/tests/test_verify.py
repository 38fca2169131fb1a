import numpy as np
import pytest

from parabolica.errors import InputError
from parabolica.instances import builtin_problem
from parabolica.ou import QuadratureRule, ou_evolution_measure
from parabolica.problem import SemilinearTerm
from parabolica.semilinear import PicardConfig
from parabolica.verify import (
    EstimateCase,
    EstimateReport,
    SpaceTimeMeasure,
    lsi_probe,
    reports_to_csv,
    reports_to_markdown,
    verify_hypercontractivity,
    verify_linear_estimates,
    verify_lp_stability,
    verify_measure_derivative,
    verify_sup_stability,
)


def with_psi(fn, **kw):
    return builtin_problem("ou1d", psi=SemilinearTerm(
        lambda t, xi: fn(np.asarray(xi, float)), **kw))


FAST_CFG = PicardConfig(backend="ou", dt=1e-2, delta=0.25, lattice_n=129,
                        lattice_radius=12.0, quad_n=24)


class TestReportInvariants:
    def test_verdict_recomputable(self):
        rep = EstimateReport("demo", "a <= b", (
            EstimateCase("c1", "", 1.0, 1.2),
            EstimateCase("c2", "", 0.9, 1.0)), 0.0, "ou", "-")
        assert rep.verdict == "PASS"
        assert rep.worst_margin == max(c.lhs - c.rhs for c in rep.cases)
        bad = EstimateReport("demo", "a <= b", (
            EstimateCase("c1", "", 1.5, 1.2),), 0.0, "ou", "-")
        assert bad.verdict == "FAIL"

    def test_not_applicable(self):
        rep = EstimateReport("demo", "claim", (), 0.0, "ou", "-", applicable=False,
                             note="missing hypothesis")
        assert rep.verdict == "NOT-APPLICABLE"


class TestLinearSuite:
    def test_ou_suite_passes(self):
        reports = verify_linear_estimates(builtin_problem("ou1d"), backend="ou",
                                          n_random=8, seed=1)
        by_name = {r.name: r for r in reports}
        assert by_name["markov_identity"].verdict == "PASS"
        assert by_name["sup_contraction"].verdict == "PASS"
        assert by_name["two_time_composition"].verdict == "PASS"
        assert by_name["measure_invariance"].verdict == "PASS"

    def test_timedep_invariance(self):
        reports = verify_linear_estimates(builtin_problem("ou_timedep"),
                                          backend="ou", n_random=4, seed=2)
        by_name = {r.name: r for r in reports}
        assert by_name["measure_invariance"].verdict == "PASS"
        assert by_name["measure_invariance"].worst_margin <= 1e-7

    def test_scaling_sanity(self):
        # multiplying f by lambda scales both sides of the linear estimates;
        # verdicts are invariant
        from parabolica.ou import apply_ou

        spec = builtin_problem("ou1d")
        rule = QuadratureRule.gauss_hermite(40, 1)
        for lam in (0.1, 10.0):
            f = lambda y: lam * np.cos(y)
            v = apply_ou(spec.ou_structure, f, 0.5, 0.0, 0.8, rule)
            base = apply_ou(spec.ou_structure, lambda y: np.cos(y), 0.5, 0.0, 0.8, rule)
            assert v == pytest.approx(lam * base, rel=1e-12)
            assert abs(v) <= lam * 1.0 + 1e-9 * lam


class TestSupStability:
    def test_dissipative_and_linearized(self):
        spec = with_psi(lambda u: -u - u**3, psi0=-1.0,
                        d_psi_at_zero=None)
        reports = verify_sup_stability(spec, horizon=3.0, cfg=FAST_CFG, n_pairs=3)
        by_name = {r.name: r for r in reports}
        assert by_name["dissipative_decay"].verdict == "PASS"
        assert by_name["continuous_dependence"].verdict == "PASS"
        assert by_name["weighted_inhomogeneous_bound"].verdict == "PASS"

    def test_cubic_only_nonincreasing(self):
        spec = with_psi(lambda u: -(u**3), psi0=0.0)
        reports = verify_sup_stability(spec, horizon=2.0, cfg=FAST_CFG, n_pairs=2)
        by_name = {r.name: r for r in reports}
        assert by_name["dissipative_decay"].verdict == "PASS"
        # psi'(0) = 0: the linearized route must be NOT-APPLICABLE, not tested
        assert by_name["linearized_decay"].verdict == "NOT-APPLICABLE"

    def test_aim1_envelope(self):
        spec = with_psi(lambda u: -u + u**3)
        reports = verify_sup_stability(spec, horizon=3.0, cfg=FAST_CFG,
                                       omega=0.5, n_pairs=2)
        by_name = {r.name: r for r in reports}
        rep = by_name["linearized_decay"]
        assert rep.verdict == "PASS"
        assert "r_omega" in rep.note
        # bisected radius should be near 0.5 sqrt((omega0-omega)/2 / 3)
        # = 0.5 sqrt(0.25/3) ~ 0.1443
        import re

        r_omega = float(re.search(r"r_omega=([0-9.e-]+)", rep.note).group(1))
        assert r_omega == pytest.approx(0.5 * np.sqrt(0.25 / 3.0), rel=0.02)

    def test_no_psi0_not_applicable(self):
        spec = with_psi(lambda u: -u + u**3)  # no psi0 claimed
        reports = verify_sup_stability(spec, horizon=1.0, cfg=FAST_CFG, n_pairs=2)
        by_name = {r.name: r for r in reports}
        assert by_name["dissipative_decay"].verdict == "NOT-APPLICABLE"


class TestLpStability:
    def test_linear_contraction_and_decay(self):
        spec = with_psi(lambda u: -(u**3), psi0=0.0)
        reports = verify_lp_stability(spec, ps=(1.5, 2.0, 4.0), horizon=2.0,
                                      cfg=FAST_CFG)
        by_name = {r.name: r for r in reports}
        assert by_name["linear_lp_contraction"].verdict == "PASS"
        assert by_name["semilinear_lp_decay"].verdict == "PASS"
        assert by_name["lp_dependence"].verdict == "PASS"

    def test_p_at_most_one_rejected(self):
        spec = with_psi(lambda u: -u, psi0=-1.0)
        with pytest.raises(InputError, match="p in"):
            verify_lp_stability(spec, ps=(1.0,))

    def test_non_ou_not_applicable(self):
        spec = builtin_problem("polycoef")
        reports = verify_lp_stability(spec)
        assert len(reports) == 1 and reports[0].verdict == "NOT-APPLICABLE"


class TestHypercontractivity:
    def test_lsi_probe_near_gaussian_constant(self):
        spec = builtin_problem("ou1d")
        mu = ou_evolution_measure(spec.ou_structure, 0.0)
        K_env, cases, _ = lsi_probe(mu)
        assert 0.45 <= K_env <= 0.55
        # damped exponentials must be the near-extremal members
        best = max(cases, key=lambda c: c[2])
        assert best[0].startswith("exp(")

    def test_schedule_suite(self):
        spec = builtin_problem("ou1d")  # psi = 0, psi0 = 0
        reports = verify_hypercontractivity(spec, p=2.0, horizon=1.5, cfg=FAST_CFG)
        by_name = {r.name: r for r in reports}
        assert by_name["schedule_monotonicity"].verdict == "PASS"
        assert by_name["hypercontractive_schedule"].verdict == "PASS"

    def test_damped_linear_psi(self):
        spec = with_psi(lambda u: -u, psi0=-1.0)
        reports = verify_hypercontractivity(spec, p=2.0, horizon=1.0, cfg=FAST_CFG)
        by_name = {r.name: r for r in reports}
        assert by_name["hypercontractive_schedule"].verdict == "PASS"


class TestMeasureDerivative:
    def test_autonomous_stationary(self):
        rep = verify_measure_derivative(builtin_problem("ou1d"),
                                        times=(0.5,), amplitude=lambda t: 1.0)
        assert rep.verdict == "PASS"
        assert rep.worst_margin <= 1e-6

    def test_product_structure_timedep(self):
        rep = verify_measure_derivative(builtin_problem("ou_timedep"), times=(0.5, 1.2))
        assert rep.verdict == "PASS"

    def test_zero_function_case_present(self):
        rep = verify_measure_derivative(builtin_problem("ou1d"), times=(0.5,))
        zero_cases = [c for c in rep.cases if c.case_id.startswith("zero")]
        assert zero_cases and all(c.lhs == 0.0 for c in zero_cases)


class TestSpaceTimeMeasure:
    def test_total_mass(self):
        spec = builtin_problem("ou_timedep")
        nu = SpaceTimeMeasure(spec.ou_structure, 0.0, 1.7)
        mass = nu.total_mass()
        assert abs(mass - 1.7) <= 1.7 * 1e-8

    def test_lp_norm_of_constant(self):
        spec = builtin_problem("ou1d")
        nu = SpaceTimeMeasure(spec.ou_structure, 0.0, 2.0)
        v = nu.lp_norm(lambda t, y: np.full_like(y, 3.0), p=2.0)
        assert v == pytest.approx(3.0 * np.sqrt(2.0), rel=1e-10)


class TestSerialization:
    def test_markdown_and_csv(self):
        reports = [EstimateReport("b_suite", "claim B", (
            EstimateCase("z", "", 1.0, 2.0), EstimateCase("a", "", 0.5, 1.0)),
            1e-3, "ou", "-"),
            EstimateReport("a_suite", "claim A", (EstimateCase("only", "", 0.0, 0.0),),
                           0.0, "grid", "-")]
        md = reports_to_markdown(reports)
        csv = reports_to_csv(reports)
        assert md.splitlines()[2].startswith("| a_suite")
        lines = csv.strip().splitlines()
        assert lines[0] == "suite,case,lhs,rhs,margin,tolerance,verdict"
        assert lines[1].startswith("a_suite,only")
        assert lines[2].startswith("b_suite,a")  # stable case ordering

    def test_csv_deterministic(self):
        reports = verify_linear_estimates(builtin_problem("ou1d"), backend="ou",
                                          n_random=3, seed=7)
        assert reports_to_csv(reports) == reports_to_csv(
            verify_linear_estimates(builtin_problem("ou1d"), backend="ou",
                                    n_random=3, seed=7))
