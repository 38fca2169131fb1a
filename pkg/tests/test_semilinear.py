import numpy as np
import pytest
from scipy.integrate import solve_ivp

from parabolica.errors import ConfigError, InputError
from parabolica.grid import Grid, SchemeConfig
from parabolica.instances import builtin_problem
from parabolica.ou import QuadratureRule, apply_ou
from parabolica.problem import SemilinearTerm
from parabolica.semilinear import (
    GronwallReport,
    PicardConfig,
    continue_solution,
    gronwall_check,
    linearize,
    picard_solve,
    residual_classical,
    sampled_lipschitz,
)

RULE = QuadratureRule.gauss_hermite(40, 1)


def ou_with_psi(psi_term):
    return builtin_problem("ou1d", psi=psi_term)


def term(fn, **kw):
    return SemilinearTerm(lambda t, xi: fn(np.asarray(xi, float)), **kw)


def ode_oracle(psi_fn, u0, ts):
    sol = solve_ivp(lambda t, y: [psi_fn(y[0])], [ts[0], ts[-1]], [u0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    return sol.sol(ts)[0]


# fast config for spatially constant data: the lattice plays no role there
CONST_CFG = PicardConfig(backend="ou", dt=5e-4, delta=0.25, lattice_n=5, quad_n=8)


class TestOdeReduction:
    @pytest.mark.parametrize("name,fn,u0,horizon", [
        ("-u", lambda u: -u, 1.0, 1.0),
        ("-u^3", lambda u: -(u**3), 1.0, 1.0),
        ("u^2", lambda u: u**2, 1.0, 0.5),
        ("sin", np.sin, 1.0, 1.0),
        ("u-u^3", lambda u: u - u**3, 0.5, 1.0),
    ])
    def test_constant_data_matches_scalar_ode(self, name, fn, u0, horizon):
        spec = ou_with_psi(term(fn))
        sol = picard_solve(spec, lambda x: np.full_like(x, u0), 0.0, horizon, CONST_CFG)
        assert sol.status == "completed"
        trace = sol.values[:, 0]
        # constants stay spatially constant up to quadrature roundoff
        assert np.max(np.abs(sol.values - trace[:, None])) < 1e-13
        exact = ode_oracle(fn, u0, sol.times)
        assert np.max(np.abs(trace - exact)) < 1e-6, name

    def test_exponential_decay_constant(self):
        spec = ou_with_psi(term(lambda u: -u))
        sol = picard_solve(spec, lambda x: np.ones_like(x), 0.0, 1.0, CONST_CFG)
        assert abs(sol.values[-1, 0] - np.exp(-1.0)) < 1e-6


class TestLinearCase:
    def test_zero_psi_matches_closed_form(self):
        spec = builtin_problem("ou1d")
        cfg = PicardConfig(backend="ou", dt=5e-3, delta=0.25, lattice_radius=12.0,
                           lattice_n=385, quad_n=40)
        sol = picard_solve(spec, np.tanh, 0.0, 0.5, cfg)
        x = sol.space[:, 0]
        mask = np.abs(x) <= 4.0
        oracle = np.array([apply_ou(spec.ou_structure, np.tanh, xi, 0.0, 0.5, RULE)
                           for xi in x[mask]])
        err = np.max(np.abs(sol.values[-1, mask] - oracle))
        assert err < 1e-3, err

    def test_grid_backend_zero_psi(self):
        spec = builtin_problem("ou1d")
        g = Grid(1, 8.0, 257)
        cfg = PicardConfig(backend="grid", dt=g.h / 2, delta=0.25, grid=g,
                           scheme=SchemeConfig(0.5, g.h / 2))
        sol = picard_solve(spec, np.cos, 0.0, 0.5, cfg)
        x = sol.space[:, 0]
        mask = np.abs(x) <= 4.0
        oracle = np.array([apply_ou(spec.ou_structure, np.cos, xi, 0.0, 0.5, RULE)
                           for xi in x[mask]])
        assert np.max(np.abs(sol.values[-1, mask] - oracle)) < 5e-3


class TestContinuation:
    def test_blowup_bracket_quadratic(self):
        spec = ou_with_psi(term(lambda u: u**2))
        cfg = PicardConfig(backend="ou", dt=1e-3, delta=0.25, lattice_n=5, quad_n=8)
        sol = continue_solution(spec, lambda x: np.ones_like(x), 0.0, 2.0, cfg)
        assert sol.status == "blowup_detected"
        lo, hi = sol.blowup_bracket
        assert lo <= 1.0 <= hi
        assert hi - lo <= 0.02 + 1e-12

    def test_cubic_damping_global(self):
        spec = ou_with_psi(term(lambda u: -(u**3), psi0=0.0))
        cfg = PicardConfig(backend="ou", dt=2e-3, delta=0.25, lattice_n=5, quad_n=8)
        sol = continue_solution(spec, lambda x: np.full_like(x, 5.0), 0.0, 5.0, cfg)
        assert sol.status == "completed"
        trace = sol.sup_norm_trace()
        assert np.all(np.diff(trace) <= 1e-12)

    def test_sine_linear_growth_bound(self):
        spec = ou_with_psi(term(np.sin, linear_growth_h=1.0))
        cfg = PicardConfig(backend="ou", dt=2e-3, delta=0.25, lattice_n=5, quad_n=8)
        sol = continue_solution(spec, lambda x: np.full_like(x, 2.0), 0.0, 3.0, cfg)
        assert sol.status == "completed"
        chk = sol.meta["apriori_bounds"]["linear_growth"]
        assert chk["satisfied"], chk

    def test_dissipative_bound_reported(self):
        spec = ou_with_psi(term(lambda u: -u, psi0=-1.0))
        cfg = PicardConfig(backend="ou", dt=1e-3, delta=0.25, lattice_n=5, quad_n=8)
        sol = continue_solution(spec, lambda x: np.ones_like(x), 0.0, 2.0, cfg)
        assert sol.meta["apriori_bounds"]["dissipativity"]["satisfied"]


class TestPicardMechanics:
    def test_contraction_ratio_below_half_plus_slack(self):
        psi = term(lambda u: -u - u**3)
        spec = ou_with_psi(psi)
        cfg = PicardConfig(backend="ou", dt=5e-3, delta=0.25, lattice_n=129,
                           lattice_radius=10.0, quad_n=24)
        sol = picard_solve(spec, lambda x: 0.5 * np.tanh(x), 0.0, 1.0, cfg)
        assert sol.status == "completed"
        for slab_ratios in sol.contraction_ratios:
            assert all(r <= 0.55 for r in slab_ratios), slab_ratios

    def test_uniqueness_two_initial_iterates(self):
        psi = term(lambda u: -u)
        spec = ou_with_psi(psi)
        base = dict(backend="ou", dt=5e-3, delta=0.1, lattice_n=65, quad_n=16,
                    tol=1e-11)
        a = picard_solve(spec, lambda x: 0.3 * np.tanh(x), 0.0, 0.3,
                         PicardConfig(**base, initial_iterate="propagated"))
        b = picard_solve(spec, lambda x: 0.3 * np.tanh(x), 0.0, 0.3,
                         PicardConfig(**base, initial_iterate="zero"))
        diff = np.max(np.abs(a.values[-1] - b.values[-1]))
        # both land within tol of the fixed point; the weighted norm can relax
        # the plain sup norm by e^{omega delta}
        assert diff < 4e-11 * np.exp(2 * 0.1 * 2)

    def test_continuous_dependence_factor_two(self):
        psi = term(lambda u: -u - u**3)
        spec = ou_with_psi(psi)
        cfg = PicardConfig(backend="ou", dt=5e-3, delta=0.25, lattice_n=129,
                           lattice_radius=10.0, quad_n=24)
        rng = np.random.default_rng(5)
        for _ in range(3):
            a, bb = rng.uniform(-0.3, 0.3, 2)
            f = lambda x: a * np.tanh(x) + bb * np.cos(x) * 0.2
            g = lambda x: a * np.tanh(x) + bb * np.cos(x) * 0.2 + rng.uniform(-0.05, 0.05)
            sf = picard_solve(spec, f, 0.0, 0.5, cfg)
            sg = picard_solve(spec, g, 0.0, 0.5, cfg)
            dist0 = np.max(np.abs(sf.values[0] - sg.values[0]))
            worst = np.max(np.abs(sf.values - sg.values))
            assert worst <= 2.0 * dist0 + 5e-3

    def test_max_iters_status(self):
        psi = term(lambda u: -u)
        spec = ou_with_psi(psi)
        cfg = PicardConfig(backend="ou", dt=5e-3, delta=0.25, lattice_n=17,
                           quad_n=8, max_iters=1, tol=1e-14)
        sol = picard_solve(spec, np.tanh, 0.0, 0.5, cfg)
        assert sol.status == "max_iters"


class TestResidual:
    def test_linear_smooth_refinement(self):
        spec = builtin_problem("ou1d")
        worsts = []
        for n, dt in ((129, 4e-3), (257, 2e-3)):
            g = Grid(1, 8.0, n)
            cfg = PicardConfig(backend="grid", dt=dt, delta=0.5, grid=g,
                               scheme=SchemeConfig(0.5, dt))
            sol = picard_solve(spec, lambda x: np.exp(-0.5 * x**2), 0.0, 0.5, cfg)
            worsts.append(residual_classical(spec, sol)["worst_residual"])
        ratio = worsts[0] / worsts[1]
        assert 3.2 <= ratio <= 4.8, (worsts, ratio)

    def test_constant_data_ode_residual(self):
        spec = ou_with_psi(term(lambda u: -u))
        g = Grid(1, 8.0, 129)
        cfg = PicardConfig(backend="grid", dt=1e-3, delta=0.5, grid=g,
                           scheme=SchemeConfig(0.5, 1e-3))
        sol = picard_solve(spec, lambda x: np.ones_like(x), 0.0, 0.5, cfg)
        rep = residual_classical(spec, sol)
        assert rep["worst_residual"] < 1e-6

    def test_cubic_tanh_residual_trend(self):
        spec = ou_with_psi(term(lambda u: -(u**3)))
        worsts = []
        for n, dt in ((257, 4e-3), (513, 2e-3)):
            g = Grid(1, 8.0, n)
            cfg = PicardConfig(backend="grid", dt=dt, delta=0.5, grid=g,
                               scheme=SchemeConfig(0.5, dt))
            sol = picard_solve(spec, np.tanh, 0.0, 0.3, cfg)
            worsts.append(residual_classical(spec, sol)["worst_residual"])
        assert worsts[0] < 5e-3
        assert worsts[1] < worsts[0]

    def test_needs_grid_backend(self):
        spec = ou_with_psi(term(lambda u: -u))
        sol = picard_solve(spec, lambda x: np.ones_like(x), 0.0, 0.2, CONST_CFG)
        with pytest.raises(InputError):
            residual_classical(spec, sol)


class TestLinearize:
    def test_cubic_with_linear_part(self):
        spec = ou_with_psi(term(lambda u: -u + u**3))
        lin = linearize(spec)
        assert lin.shift(0.3) == pytest.approx(-1.0, abs=1e-9)
        assert lin.omega0 == pytest.approx(1.0, abs=1e-9)
        assert not lin.flagged
        xi = np.linspace(-2, 2, 9)
        assert np.allclose(lin.Phi(0.0, xi), xi**3, atol=1e-8)
        assert lin.Phi(0.0, np.array([0.0]))[0] == 0.0

    def test_time_dependent_shift(self):
        from parabolica.problem import TimeWindow

        psi = SemilinearTerm(lambda t, xi: -(2.0 + np.sin(t)) * np.asarray(xi, float),
                             d_psi_at_zero=lambda t: -(2.0 + np.sin(t)))
        # window covers a full period so sup_t of the shift is seen
        spec = builtin_problem("ou1d", psi=psi, window=TimeWindow(0.0, 2 * np.pi))
        lin = linearize(spec)
        assert lin.omega0 == pytest.approx(1.0, abs=1e-3)  # sampled sup over the window
        s, t = 0.3, 1.7
        exact = np.exp(-(2 * (t - s) + np.cos(s) - np.cos(t)))
        assert lin.exponential_factor(s, t) == pytest.approx(exact, rel=1e-10)
        assert np.allclose(lin.Phi(0.9, np.linspace(-1, 1, 5)), 0.0, atol=1e-12)

    def test_flagged_when_no_decay(self):
        spec = ou_with_psi(term(lambda u: u**2))
        lin = linearize(spec)
        assert lin.omega0 == pytest.approx(0.0, abs=1e-6)
        assert lin.flagged

    def test_finite_difference_fallback_records_step(self):
        # term() supplies no derivative oracle, so linearize falls back to a
        # central difference at zero and records the step
        spec = ou_with_psi(term(lambda u: -u + u**3))
        lin = linearize(spec)
        assert lin.fd_step is not None
        assert lin.omega0 == pytest.approx(1.0, abs=1e-6)
        withd = builtin_problem("ou1d", psi=SemilinearTerm(
            spec.nonlinearity.psi, d_psi_at_zero=lambda t: -1.0))
        assert linearize(withd).fd_step is None


class TestGronwall:
    def test_equality_case(self):
        ts = np.linspace(0, 2, 201)
        k, h = 1.5, 0.7
        rep = gronwall_check(ts, k * np.exp(h * ts), k=k, h=h)
        assert rep.passed
        assert abs(rep.conclusion_margin) < 1e-9

    def test_constant_zero_rate(self):
        ts = np.linspace(0, 1, 51)
        rep = gronwall_check(ts, np.full(51, 2.0), k=2.0, h=0.0)
        assert rep.passed

    def test_slow_growth_positive_margin(self):
        # w = k e^{h(t-a)/2} grows slower than the rate-h envelope; the integral
        # hypothesis holds with positive margin
        ts = np.linspace(0, 2, 401)
        k, h = 1.0, 0.8
        rep = gronwall_check(ts, k * np.exp(0.5 * h * ts), k=k, h=h)
        assert rep.passed
        assert rep.hypothesis_margin > 0
        assert rep.conclusion_margin > 0

    def test_dissipative_variant(self):
        # the equality trace needs slack for the trapezoid's O(dt^2) overestimate
        ts = np.linspace(0, 3, 301)
        rep = gronwall_check(ts, 2.0 * np.exp(-ts), h=-1.0, variant="dissipative",
                             slack=1e-4)
        assert rep.passed
        assert rep.hypothesis_margin > -1e-4

    def test_dissipative_needs_nonpositive_rate(self):
        ts = np.linspace(0, 1, 11)
        with pytest.raises(InputError):
            gronwall_check(ts, np.ones(11), h=0.5, variant="dissipative")

    def test_malformed_series(self):
        with pytest.raises(InputError):
            gronwall_check([0.0, 0.0], [1.0, 1.0], k=1.0, h=0.0)


def test_sampled_lipschitz_cubic():
    # max |d/dxi (-xi^3)| over [-2, 2] = 12
    L = sampled_lipschitz(lambda t, xi: -np.asarray(xi) ** 3, [0.0], 2.0, n=2001)
    assert L == pytest.approx(12.0, rel=1e-3)


def test_backend_validation():
    spec = builtin_problem("polycoef")  # no ou_structure
    with pytest.raises(ConfigError):
        picard_solve(spec, lambda x: np.ones_like(x), 0.0, 0.5,
                     PicardConfig(backend="ou"))
    with pytest.raises(ConfigError):
        PicardConfig(backend="nope")


class TestSolutionGradientScaling:
    def test_semilinear_field_gradient_exponent(self):
        # gradient smoothing carries over to the semilinear solution fields:
        # from bounded steep data, max|grad u(t)| over the interior scales like
        # (t-s)^{-1/2}; from C^1 data it stays bounded
        from parabolica.grid import grid_gradient

        spec = ou_with_psi(term(lambda u: -(u**3)))
        g = Grid(1, 8.0, 1025)
        mask = np.abs(g.axis()) <= 4.0
        dt = 2.0 ** -10
        cfg = PicardConfig(backend="grid", dt=dt, delta=0.25, grid=g,
                           scheme=SchemeConfig(1.0, dt))
        sol = picard_solve(spec, lambda x: np.tanh(x / 0.05), 0.0, 0.25, cfg)
        xs, ys = [], []
        for k in range(2, 9):
            tau = 2.0 ** (-k)
            idx = int(np.argmin(np.abs(sol.times - tau)))
            assert abs(sol.times[idx] - tau) < 1e-12
            from parabolica.grid import GridField

            fld = GridField(g, sol.values[idx], enforce_boundary=False)
            gmax = float(np.max(np.abs(grid_gradient(fld)[0].values[mask])))
            xs.append(np.log(tau))
            ys.append(np.log(gmax))
        slope = float(np.polyfit(xs, ys, 1)[0])
        assert -0.6 <= slope <= -0.4, slope

        sol_smooth = picard_solve(spec, np.cos, 0.0, 0.25, cfg)
        gmaxes = []
        for k in range(2, 9):
            tau = 2.0 ** (-k)
            idx = int(np.argmin(np.abs(sol_smooth.times - tau)))
            from parabolica.grid import GridField

            fld = GridField(g, sol_smooth.values[idx], enforce_boundary=False)
            gmaxes.append(float(np.max(np.abs(grid_gradient(fld)[0].values[mask]))))
        # C^1 data: bounded, no blow-up of the gradient as t -> s
        assert max(gmaxes) <= 1.1


def test_level_csv_dump():
    spec = ou_with_psi(term(lambda u: -u))
    sol = picard_solve(spec, lambda x: np.ones_like(x), 0.0, 0.2, CONST_CFG)
    text = sol.level_csv(len(sol.times) - 1)
    lines = text.strip().splitlines()
    assert lines[0] == "x1,u"
    assert len(lines) == 1 + sol.values.shape[1]
    assert float(lines[1].split(",")[1]) == pytest.approx(np.exp(-0.2), abs=1e-6)
