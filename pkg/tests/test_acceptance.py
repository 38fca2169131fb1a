"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers after the asserts (run with `pytest -s` to see them all).
"""

import numpy as np
import pytest

from parabolica.cli import run_scenario
from parabolica.grid import Grid, SchemeConfig, propagate_linear
from parabolica.instances import builtin_problem
from parabolica.mc import SDEConfig, estimate_propagator, simulate
from parabolica.ou import QuadratureRule, apply_ou, ou_evolution_measure
from parabolica.problem import (
    SamplePlan,
    SemilinearTerm,
    check_base_hypotheses,
)
from parabolica.scenario import parse_scenario
from parabolica.semilinear import PicardConfig, continue_solution, picard_solve
from parabolica.verify import (
    lsi_probe,
    verify_hypercontractivity,
    verify_linear_estimates,
    verify_lp_stability,
    verify_measure_derivative,
    verify_sup_stability,
)

RULE = QuadratureRule.gauss_hermite(40, 1)
OU1 = builtin_problem("ou1d")


def with_psi(fn, **kw):
    return builtin_problem("ou1d", psi=SemilinearTerm(
        lambda t, xi: fn(np.asarray(xi, float)), **kw))


FAMS = (("x", lambda y: y), ("x^2", lambda y: y**2),
        ("cos(x)", lambda y: np.cos(y)), ("tanh(x)", np.tanh))


def test_criterion_01_backend_agreement():
    rng = np.random.default_rng(2026)
    grid = Grid(1, 8.0, 513)
    worst_grid = 0.0
    worst_mc_excess = -np.inf
    dt_mc = 1e-3
    for i in range(20):
        x = float(rng.uniform(-2, 2))
        s = float(rng.uniform(0, 1))
        t = s + float(rng.uniform(0.1, 2.0))
        cfg = SDEConfig(dt=dt_mc, n_paths=100_000, seed=1000 + i)
        ens = simulate(OU1, [x], s, t, cfg)
        for name, f in FAMS:
            closed = apply_ou(OU1.ou_structure, f, [x], s, t, RULE)
            fld, _ = propagate_linear(OU1, f, s, t, grid, SchemeConfig(0.5, grid.h))
            err_grid = abs(fld.at([x]) - closed)
            assert err_grid <= 5e-3, (name, x, s, t, err_grid)
            worst_grid = max(worst_grid, err_grid)
            est, se = estimate_propagator(OU1, f, [x], s, t, cfg, ensemble=ens)
            excess = abs(est - closed) - (3 * se + 2 * dt_mc)
            assert excess <= 0, (name, x, s, t, excess)
            worst_mc_excess = max(worst_mc_excess, excess)
    print(f"\ncriterion 1 PASS: backend agreement; worst grid err {worst_grid:.3g} "
          f"(<= 5e-3), worst MC excess over 3se+2dt {worst_mc_excess:.3g} (<= 0)")


def test_criterion_02_markov_contraction():
    reports = verify_linear_estimates(OU1, backend="ou", n_random=20, seed=4)
    by = {r.name: r for r in reports}
    assert by["markov_identity"].verdict == "PASS"
    assert by["markov_identity"].worst_margin <= 1e-9
    assert by["sup_contraction"].verdict == "PASS"
    g = Grid(1, 8.0, 513)
    fld, _ = propagate_linear(OU1, lambda x: np.ones_like(x), 0.0, 1.0, g,
                              SchemeConfig(0.5, g.h))
    mask = np.abs(g.axis()) <= 4.0
    grid_err = float(np.max(np.abs(fld.values[mask] - 1.0)))
    assert grid_err <= 5e-3
    print(f"\ncriterion 2 PASS: Markov/contraction; closed-form G1 err "
          f"{by['markov_identity'].worst_margin:.2g} (<= 1e-9), grid plateau err "
          f"{grid_err:.2g} (<= 5e-3)")


def test_criterion_03_measure_invariance():
    worst = 0.0
    for name in ("ou1d", "ou_timedep"):
        reports = verify_linear_estimates(builtin_problem(name), backend="ou",
                                          n_random=4, seed=5)
        rep = {r.name: r for r in reports}["measure_invariance"]
        assert rep.verdict == "PASS"
        assert rep.worst_margin <= 1e-7, (name, rep.worst_margin)
        worst = max(worst, rep.worst_margin)
    print(f"\ncriterion 3 PASS: invariance identity on both OU instances; "
          f"worst |LHS-RHS| {worst:.3g} (<= 1e-7)")


def test_criterion_04_gradient_scaling():
    reports = verify_linear_estimates(OU1, backend="grid")
    rep = {r.name: r for r in reports}["gradient_time_scaling"]
    assert rep.verdict == "PASS"
    slope = [c.lhs for c in rep.cases if c.case_id == "exponent_upper"][0]
    assert -0.6 <= slope <= -0.4
    print(f"\ncriterion 4 PASS: gradient time-scaling exponent {slope:.4f} "
          f"(in [-0.6, -0.4])")


def test_criterion_05_picard_machinery():
    spec = with_psi(lambda u: -u - u**3, psi0=-1.0)
    cfg = PicardConfig(backend="ou", dt=5e-3, delta=0.25, lattice_n=129,
                       lattice_radius=12.0, quad_n=24)
    sol = picard_solve(spec, lambda x: 0.5 * np.tanh(x), 0.0, 1.0, cfg)
    assert sol.status == "completed"
    worst_ratio = max((r for slab in sol.contraction_ratios for r in slab),
                      default=0.0)
    assert worst_ratio <= 0.55

    base = dict(backend="ou", dt=5e-3, delta=0.1, lattice_n=65, quad_n=16, tol=1e-11)
    a = picard_solve(spec, lambda x: 0.3 * np.tanh(x), 0.0, 0.3,
                     PicardConfig(**base, initial_iterate="propagated"))
    b = picard_solve(spec, lambda x: 0.3 * np.tanh(x), 0.0, 0.3,
                     PicardConfig(**base, initial_iterate="zero"))
    uniq = float(np.max(np.abs(a.values[-1] - b.values[-1])))
    # 2 * tolerance, relaxed by the weighted-norm factor e^{omega delta}
    assert uniq <= 2e-11 * np.exp(2 * 4.0 * 0.1) + 1e-12, uniq

    reports = verify_sup_stability(spec, horizon=0.5, cfg=cfg, n_pairs=10, seed=6)
    dep = {r.name: r for r in reports}["continuous_dependence"]
    assert dep.verdict == "PASS"
    assert len(dep.cases) == 10
    print(f"\ncriterion 5 PASS: Picard machinery; worst contraction ratio "
          f"{worst_ratio:.3f} (<= 0.55), two-iterate gap {uniq:.2g}, "
          f"dependence margin {dep.worst_margin:.2g} (+5e-3 slack)")


CONST_CFG = PicardConfig(backend="ou", dt=5e-4, delta=0.25, lattice_n=5, quad_n=8)


def test_criterion_06_ode_reduction_and_blowup():
    from scipy.integrate import solve_ivp

    cases = ((lambda u: -u, 1.0, 1.0), (lambda u: -(u**3), 1.0, 1.0),
             (lambda u: u**2, 1.0, 0.5), (np.sin, 1.0, 1.0),
             (lambda u: u - u**3, 0.5, 1.0))
    worst = 0.0
    for fn, u0, horizon in cases:
        spec = with_psi(fn)
        sol = picard_solve(spec, lambda x: np.full_like(x, u0), 0.0, horizon, CONST_CFG)
        assert sol.status == "completed"
        oracle = solve_ivp(lambda t, y: [fn(y[0])], [0, horizon], [u0],
                           rtol=1e-12, atol=1e-14, dense_output=True)
        err = float(np.max(np.abs(sol.values[:, 0] - oracle.sol(sol.times)[0])))
        assert err <= 1e-6, err
        worst = max(worst, err)

    spec = with_psi(lambda u: u**2)
    bl = continue_solution(spec, lambda x: np.ones_like(x), 0.0, 2.0,
                           PicardConfig(backend="ou", dt=1e-3, delta=0.25,
                                        lattice_n=5, quad_n=8))
    assert bl.status == "blowup_detected"
    lo, hi = bl.blowup_bracket
    assert lo <= 1.0 <= hi
    assert hi - lo <= 0.02 + 1e-12
    print(f"\ncriterion 6 PASS: ODE reduction worst err {worst:.2g} (<= 1e-6); "
          f"blow-up bracket [{lo:.6f}, {hi:.6f}] contains 1, width {hi-lo:.4f} (<= 0.02)")


def test_criterion_07_sup_norm_decay():
    worst = -np.inf
    for fn, psi0 in ((lambda u: -u - u**3, -1.0), (lambda u: -(u**3), 0.0)):
        spec = with_psi(fn, psi0=psi0)
        reports = verify_sup_stability(
            spec, horizon=3.0,
            cfg=PicardConfig(backend="ou", dt=1e-2, delta=0.25, lattice_n=129,
                             lattice_radius=12.0, quad_n=24),
            n_pairs=2, seed=7)
        rep = {r.name: r for r in reports}["dissipative_decay"]
        assert rep.verdict == "PASS", (psi0, rep.worst_margin)
        worst = max(worst, rep.worst_margin)
    print(f"\ncriterion 7 PASS: sup-norm decay for psi0 in {{-1, 0}}; worst margin "
          f"{worst:.3g} (<= 5e-3)")


def test_criterion_08_lp_decay_and_contraction():
    spec = with_psi(lambda u: -(u**3), psi0=0.0)
    reports = verify_lp_stability(
        spec, ps=(1.5, 2.0, 4.0), horizon=2.0,
        cfg=PicardConfig(backend="ou", dt=1e-2, delta=0.25, lattice_n=129,
                         lattice_radius=12.0, quad_n=24))
    by = {r.name: r for r in reports}
    assert by["linear_lp_contraction"].verdict == "PASS"
    assert by["semilinear_lp_decay"].verdict == "PASS"
    m1 = by["linear_lp_contraction"].worst_margin
    m2 = by["semilinear_lp_decay"].worst_margin
    assert m1 <= 0.01 and m2 <= 0.01
    print(f"\ncriterion 8 PASS: L^p contraction margin {m1:.3g}, decay margin "
          f"{m2:.3g} (both <= 1% in relative form), p in {{1.5, 2, 4}}")


def test_criterion_09_hypercontractivity():
    mu = ou_evolution_measure(OU1.ou_structure, 0.0)
    K_env, _, _ = lsi_probe(mu)
    assert 0.45 <= K_env <= 0.55, K_env
    reports = verify_hypercontractivity(
        OU1, p=2.0, horizon=1.5,
        cfg=PicardConfig(backend="ou", dt=1e-2, delta=0.25, lattice_n=129,
                         lattice_radius=12.0, quad_n=24))
    rep = {r.name: r for r in reports}["hypercontractive_schedule"]
    assert rep.verdict == "PASS"
    assert rep.worst_margin <= 0.01
    print(f"\ncriterion 9 PASS: LSI probe K {K_env:.4f} (in [0.45, 0.55]); "
          f"schedule margin {rep.worst_margin:.3g} (<= 1%) with K inflated 10%")


def test_criterion_10_measure_derivative():
    worst = 0.0
    for name in ("ou1d", "ou_timedep"):
        rep = verify_measure_derivative(builtin_problem(name), times=(0.5, 1.2))
        assert rep.verdict == "PASS", (name, rep.worst_margin)
        worst = max(worst, rep.worst_margin)
    print(f"\ncriterion 10 PASS: measure-derivative identity; worst |LHS-RHS| "
          f"{worst:.3g} (<= 1e-5)")


def test_criterion_11_hypothesis_validators():
    plan = SamplePlan(0.0, 1.0, radius=10.0)
    rep = check_base_hypotheses(OU1, plan)
    assert rep.all_passed
    viol = rep.clause("lyapunov_drift").violation
    assert viol <= 1e-12

    heat = check_base_hypotheses(builtin_problem("heat1d"), plan)
    lya = heat.clause("lyapunov_drift")
    assert not lya.passed
    assert lya.witness_x is not None

    poly = check_base_hypotheses(builtin_problem("polycoef"),
                                 SamplePlan(0.0, 1.0, radius=6.0))
    assert poly.all_passed
    print(f"\ncriterion 11 PASS: validators; ou1d violation {viol:.2g} (~0), "
          f"heat witness x={lya.witness_x[0]:.3g}, polycoef (m>l-1) all clauses pass")


VERIFY_DOC = """
[problem]
builtin = "ou1d"
psi = "-u - u^3"
psi0 = -1.0

[run]
command = "verify"
suite = "sup-stability"
window = [0.0, 1.5]
horizon = 1.5
n_pairs = 2
seed = 13
"""


def test_criterion_12_cli_determinism(tmp_path):
    sc = parse_scenario(VERIFY_DOC)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    code1 = run_scenario(sc, out_dir=out1, seed=13)
    code2 = run_scenario(sc, out_dir=out2, seed=13)
    assert code1 == 0 and code2 == 0
    b1 = (out1 / "report.csv").read_bytes()
    b2 = (out2 / "report.csv").read_bytes()
    assert b1 == b2
    print(f"\ncriterion 12 PASS: repeated verify runs byte-identical "
          f"({len(b1)} bytes of CSV)")
