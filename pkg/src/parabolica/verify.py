"""Executable estimate suites: each turns a quantitative claim about the
evolution operator / mild solutions into an EstimateReport with stored cases,
so the verdict is recomputable from the report alone.

Existential constants are never invented: suites check explicit functional
forms (exponents, exponential rates, the factor 2 in the dependence bounds)
and report empirical envelopes for the rest.  Default tolerances follow the
backend accuracy model: 1e-7 closed-form only, 5e-3 grid vs closed form,
3 stderr + 2 dt against Monte Carlo.

Invariance is checked in the push-forward pairing
int G(t,s)f dmu_s = int f dmu_t, and the measure-derivative identity with the
matching sign d/dt int g dmu_t = int D_t g dmu_t + int A(t) g dmu_t (see the
ou module notes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InputError
from .grid import Grid, SchemeConfig, grid_gradient, propagate_linear
from .ou import (
    GaussianMeasure,
    QuadratureRule,
    apply_propagator,
    apply_propagator_batch,
    compute_propagator,
    gaussian_lp_norm,
    measure_integral,
    ou_evolution_measure,
)
from .problem import ProblemSpec, ScalarField, apply_generator
from .semilinear import (
    PicardConfig,
    gronwall_check,
    linearize,
    picard_solve,
    sampled_lipschitz,
)

__all__ = [
    "EstimateCase",
    "EstimateReport",
    "SpaceTimeMeasure",
    "verify_linear_estimates",
    "verify_sup_stability",
    "verify_lp_stability",
    "verify_hypercontractivity",
    "verify_measure_derivative",
    "reports_to_markdown",
    "reports_to_csv",
]


@dataclass(frozen=True)
class EstimateCase:
    case_id: str
    inputs: str
    lhs: float
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "lhs", float(self.lhs))
        object.__setattr__(self, "rhs", float(self.rhs))

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


@dataclass(frozen=True)
class EstimateReport:
    name: str
    claim: str
    cases: Tuple[EstimateCase, ...]
    tolerance: float
    backend: str
    resolution: str
    applicable: bool = True
    note: str = ""

    @property
    def worst_margin(self) -> float:
        return max((c.margin for c in self.cases), default=float("-inf"))

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "NOT-APPLICABLE"
        return "PASS" if self.worst_margin <= self.tolerance else "FAIL"


def _na_report(name, claim, why, backend="-") -> EstimateReport:
    return EstimateReport(name, claim, (), 0.0, backend, "-", applicable=False, note=why)


class SpaceTimeMeasure:
    """The product-in-time measure nu(J x O) = int_J mu_t(O) dt on [s, tau],
    realized by an outer Simpson rule over cached Gaussian slices."""

    def __init__(self, ou, s: float, tau: float, horizon: float = 40.0,
                 rule: Optional[QuadratureRule] = None, n_time: int = 33):
        if not tau > s:
            raise InputError("need tau > s")
        if n_time % 2 == 0:
            n_time += 1
        self.ou = ou
        self.s = s
        self.tau = tau
        self.horizon = horizon
        self.rule = rule or QuadratureRule.gauss_hermite(d=ou.d)
        self.n_time = n_time
        self._cache = {}

    def measure_at(self, t: float) -> GaussianMeasure:
        key = round(float(t), 12)
        if key not in self._cache:
            self._cache[key] = ou_evolution_measure(self.ou, t, self.horizon, tol=1e-8)
        return self._cache[key]

    def _simpson_weights(self):
        n = self.n_time - 1
        w = np.ones(self.n_time)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (self.tau - self.s) / n / 3.0

    def total_mass(self) -> float:
        ts = np.linspace(self.s, self.tau, self.n_time)
        w = self._simpson_weights()
        return float(sum(wk * measure_integral(lambda y: np.ones(len(np.atleast_1d(y))),
                                               self.measure_at(t), self.rule)
                         for wk, t in zip(w, ts)))

    def lp_norm(self, u: Callable, p: float) -> float:
        """(int_s^tau int |u(t,x)|^p dmu_t dt)^(1/p); u(t, x-batch) -> values."""
        if not p > 1:
            raise InputError("p > 1 required")
        ts = np.linspace(self.s, self.tau, self.n_time)
        w = self._simpson_weights()
        acc = 0.0
        for wk, t in zip(w, ts):
            acc += wk * measure_integral(lambda y: np.abs(u(t, y)) ** p,
                                         self.measure_at(t), self.rule)
        return float(acc ** (1.0 / p))


# ---------------------------------------------------------------------------
# Linear estimates
# ---------------------------------------------------------------------------

_INVARIANCE_FAMILY = (
    ("1", lambda y: np.ones_like(y)),
    ("x", lambda y: y),
    ("x^2", lambda y: y**2),
    ("exp(-x^2)", lambda y: np.exp(-(y**2))),
    ("cos(2x)", lambda y: np.cos(2.0 * y)),
)


def verify_linear_estimates(spec: ProblemSpec, backend: str = "ou",
                            n_random: int = 20, seed: int = 0,
                            grid: Optional[Grid] = None,
                            horizon: float = 40.0) -> List[EstimateReport]:
    """Markov identity, sup contraction, two-time composition, measure
    invariance (closed form), and the gradient time-scaling exponents (grid).
    """
    reports = []
    rng = np.random.default_rng(seed)
    if backend == "ou":
        if spec.ou_structure is None:
            return [_na_report("linear", "evolution-operator estimates",
                               "no OU structure on this spec", backend)]
        ou = spec.ou_structure
        rule = QuadratureRule.gauss_hermite(d=ou.d)
        res = f"GH {rule.n_per_axis}/axis, 64 ODE steps per unit"

        cases_markov, cases_contr = [], []
        fam = (("cos(x)", lambda y: np.cos(y), 1.0),
               ("tanh(x)", np.tanh, 1.0),
               ("1/(1+x^2)", lambda y: 1.0 / (1.0 + y**2), 1.0))
        for i in range(n_random):
            x = float(rng.uniform(-2, 2))
            s = float(rng.uniform(0, 1))
            t = s + float(rng.uniform(0.1, 2.0))
            prop = compute_propagator(ou, s, t)
            one = apply_propagator(prop, lambda y: np.ones_like(y), [x], rule)
            cases_markov.append(EstimateCase(
                f"markov[{i}]", f"x={x:.3g}, s={s:.3g}, t={t:.3g}", abs(one - 1.0), 0.0))
            name, f, supf = fam[i % len(fam)]
            val = apply_propagator(prop, f, [x], rule)
            cases_contr.append(EstimateCase(
                f"contraction[{i}]", f"f={name}, x={x:.3g}, s={s:.3g}, t={t:.3g}",
                abs(val), supf))
        reports.append(EstimateReport(
            "markov_identity", "G(t,s)1 = 1", tuple(cases_markov), 1e-9, backend, res))
        reports.append(EstimateReport(
            "sup_contraction", "sup|G(t,s)f| <= sup|f|", tuple(cases_contr),
            1e-9, backend, res))

        ck_cases = []
        for i in range(5):
            s = float(rng.uniform(0, 0.5))
            r = s + float(rng.uniform(0.2, 0.6))
            t = r + float(rng.uniform(0.2, 0.6))
            x = float(rng.uniform(-1.5, 1.5))
            f = lambda y: np.cos(y)
            direct = apply_propagator(compute_propagator(ou, s, t, 512), f, [x], rule)
            inner_prop = compute_propagator(ou, r, t, 512)
            inner = lambda y: apply_propagator_batch(inner_prop, f,
                                                     np.atleast_1d(y).reshape(-1, 1), rule)
            composed = apply_propagator(compute_propagator(ou, s, r, 512), inner, [x], rule)
            ck_cases.append(EstimateCase(
                f"composition[{i}]", f"s={s:.3g}, r={r:.3g}, t={t:.3g}, x={x:.3g}",
                abs(direct - composed), 0.0))
        reports.append(EstimateReport(
            "two_time_composition", "G(t,s) = G(t,r) G(r,s)", tuple(ck_cases),
            1e-8, backend, res))

        # exp(-x^2) narrows faster than the weight when the slice variance
        # nears 3; the 64-node rule (still far under the tensor ceiling)
        # restores spectral accuracy for the whole family
        rule_f = QuadratureRule.gauss_hermite(64, 1) if ou.d == 1 else rule
        inv_cases = []
        for (s, t) in ((0.2, 1.5), (0.0, 0.9)):
            mu_s = ou_evolution_measure(ou, s, horizon, tol=1e-8)
            mu_t = ou_evolution_measure(ou, t, horizon, tol=1e-8)
            prop = compute_propagator(ou, s, t, 512)
            for fname, f in _INVARIANCE_FAMILY:
                lhs_f = measure_integral(
                    lambda x: apply_propagator_batch(prop, f, np.atleast_1d(x).reshape(-1, 1), rule_f),
                    mu_s, rule_f)
                rhs_f = measure_integral(f, mu_t, rule_f)
                inv_cases.append(EstimateCase(
                    f"invariance[{fname},s={s},t={t}]", f"f={fname}",
                    abs(lhs_f - rhs_f), 0.0))
        reports.append(EstimateReport(
            "measure_invariance", "int G(t,s)f dmu_s = int f dmu_t",
            tuple(inv_cases), 1e-7, backend, res))
        return reports

    if backend != "grid":
        raise ConfigError(f"unknown backend {backend!r}")
    if spec.d != 1:
        return [_na_report("linear", "evolution-operator estimates",
                           "grid gradient suite implemented for d=1", backend)]
    g = grid or Grid(1, 8.0, 2049)
    mask = np.abs(g.axis()) <= g.radius / 2
    res = f"grid n={g.n}, R={g.radius}"

    one_cases = []
    fld, _ = propagate_linear(spec, lambda x: np.ones_like(x), 0.0, 1.0, g,
                              SchemeConfig(0.5, g.h))
    one_cases.append(EstimateCase("markov_grid", "f=1, t-s=1",
                                  float(np.max(np.abs(fld.values[mask] - 1.0))), 0.0))
    reports.append(EstimateReport(
        "markov_identity", "G(t,s)1 = 1 (interior)", tuple(one_cases), 5e-3,
        backend, res))

    steep = lambda x: np.tanh(x / 0.05)
    xs, ys = [], []
    for k in range(2, 9):
        tau = 2.0 ** (-k)
        fld, _ = propagate_linear(spec, steep, 0.0, tau, g, SchemeConfig(1.0, tau / 64))
        gmax = float(np.max(np.abs(grid_gradient(fld)[0].values[mask])))
        xs.append(np.log(tau))
        ys.append(np.log(gmax))
    slope = float(np.polyfit(xs, ys, 1)[0])
    k1_env = float(np.max(np.exp(ys) * np.sqrt(np.exp(xs))))
    grad_cases = (
        EstimateCase("exponent_upper", "fitted slope vs -0.4", slope, -0.4),
        EstimateCase("exponent_lower", "-0.6 vs fitted slope", -0.6, slope),
    )
    reports.append(EstimateReport(
        "gradient_time_scaling",
        "max|grad G(t,s)f| ~ (t-s)^(-1/2) on steep bounded data",
        grad_cases, 0.0, backend, res,
        note=f"empirical K1 envelope {k1_env:.4g} (existential constant, reported only)"))

    xs2, ys2 = [], []
    for k in range(2, 9):
        tau = 2.0 ** (-k)
        fld, _ = propagate_linear(spec, np.cos, 0.0, tau, g, SchemeConfig(1.0, tau / 64))
        gmax = float(np.max(np.abs(grid_gradient(fld)[0].values[mask])))
        xs2.append(np.log(tau))
        ys2.append(np.log(gmax))
    slope2 = float(np.polyfit(xs2, ys2, 1)[0])
    c1_cases = (EstimateCase("flat_exponent", "|fitted slope| for C1 data",
                             abs(slope2), 0.0),)
    reports.append(EstimateReport(
        "gradient_c1_flatness",
        "max|grad G(t,s)f| stays bounded as t -> s for C1 data",
        c1_cases, 0.1, backend, res,
        note=f"empirical K2 envelope {float(np.max(np.exp(ys2))):.4g}"))
    return reports


# ---------------------------------------------------------------------------
# Sup-norm stability
# ---------------------------------------------------------------------------


def _ou_picard_cfg(dt=5e-3, lattice_n=161, quad_n=24, delta=0.25) -> PicardConfig:
    return PicardConfig(backend="ou", dt=dt, delta=delta, lattice_n=lattice_n,
                        lattice_radius=12.0, quad_n=quad_n)


def verify_sup_stability(spec: ProblemSpec, horizon: float = 3.0,
                         cfg: Optional[PicardConfig] = None,
                         omega: float = 0.5,
                         n_pairs: int = 10, seed: int = 0) -> List[EstimateReport]:
    """Dissipative sup-norm decay, linearized decay with the bisected
    smallness radius, factor-2 continuous dependence, and the weighted
    inhomogeneous bound.  Hypothesis-violating requests come back
    NOT-APPLICABLE, never silently tested."""
    cfg = cfg or _ou_picard_cfg()
    if cfg.backend == "ou" and spec.ou_structure is None:
        return [_na_report("sup_stability", "sup-norm stability suite",
                           "no OU structure for the closed-form backend")]
    reports = []
    nl = spec.nonlinearity
    s = spec.window.s
    res = f"picard dt={cfg.dt}, lattice {cfg.lattice_n}, quad {cfg.quad_n}"

    if nl.psi0 is None:
        reports.append(_na_report(
            "dissipative_decay", "|u(t,x)| <= e^{psi0 (t-s)} sup|f|",
            "psi0 not claimed by the spec", cfg.backend))
    else:
        cases = []
        fam = (("tanh(x)", np.tanh), ("cos(x)", lambda y: np.cos(y)))
        for fname, f in fam:
            sol = picard_solve(spec, f, s, s + horizon, cfg)
            trace = sol.sup_norm_trace()
            env = np.exp(nl.psi0 * (sol.times - s)) * trace[0]
            cases.append(EstimateCase(
                f"decay[{fname}]", f"f={fname}, horizon={horizon}",
                float(np.max(trace - env)), 0.0))
            if nl.psi0 <= 0:
                rep = gronwall_check(sol.times, trace, h=nl.psi0,
                                     variant="dissipative", slack=5e-3)
                cases.append(EstimateCase(
                    f"gronwall[{fname}]", "consistency layer (variant ii)",
                    -min(rep.hypothesis_margin, rep.conclusion_margin), 5e-3))
        reports.append(EstimateReport(
            "dissipative_decay", "|u(t,x)| <= e^{psi0 (t-s)} sup|f|",
            tuple(cases), 5e-3, cfg.backend, res,
            note=f"psi0 = {nl.psi0}"))

    lin = linearize(spec)
    if lin.flagged or not (0 < omega < lin.omega0):
        reports.append(_na_report(
            "linearized_decay", "sup|u(t)| <= 2 e^{-omega (t-s)} sup|f|",
            f"linearized rate omega0={lin.omega0:.4g} does not dominate omega={omega}",
            cfg.backend))
    else:
        target = (lin.omega0 - omega) / 2.0
        ts_samples = np.linspace(s, s + horizon, 9)

        def K_of(rho):
            return sampled_lipschitz(lambda t, xi: lin.Phi(t, xi), ts_samples, rho)

        lo, hi = 0.0, 1.0
        while K_of(hi) <= target and hi < 64:
            hi *= 2
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if K_of(mid) <= target:
                lo = mid
            else:
                hi = mid
        r_omega = lo / 2.0
        f = lambda x: r_omega * np.tanh(x)
        sol = picard_solve(spec, f, s, s + horizon, cfg)
        trace = sol.sup_norm_trace()
        env = 2.0 * np.exp(-omega * (sol.times - s)) * trace[0]
        cases = (EstimateCase(
            "linearized_decay", f"f = r_omega tanh, r_omega={r_omega:.4g}",
            float(np.max(trace - env)), 0.0),)
        reports.append(EstimateReport(
            "linearized_decay", "sup|u(t)| <= 2 e^{-omega (t-s)} sup|f|",
            cases, 5e-3, cfg.backend, res,
            note=f"omega={omega}, omega0={lin.omega0:.4g}, r_omega={r_omega:.4g} "
                 "(bisection on the sampled remainder Lipschitz radius)"))

    rng = np.random.default_rng(seed)
    dep_cases = []
    for i in range(n_pairs):
        a1, a2 = rng.uniform(-0.3, 0.3, 2)
        eps = float(rng.uniform(-0.05, 0.05))
        f = lambda x: a1 * np.tanh(x) + a2 * 0.2 * np.cos(x)
        gfun = lambda x: a1 * np.tanh(x) + a2 * 0.2 * np.cos(x) + eps * np.exp(-0.5 * x**2)
        sf = picard_solve(spec, f, s, s + min(0.5, horizon), cfg)
        sg = picard_solve(spec, gfun, s, s + min(0.5, horizon), cfg)
        d0 = float(np.max(np.abs(sf.values[0] - sg.values[0])))
        worst = float(np.max(np.abs(sf.values - sg.values)))
        dep_cases.append(EstimateCase(
            f"pair[{i}]", f"|f-g|_inf = {d0:.4g}", worst, 2.0 * d0))
    reports.append(EstimateReport(
        "continuous_dependence", "sup_t |u_f(t) - u_g(t)|_inf <= 2 |f-g|_inf",
        tuple(dep_cases), 5e-3, cfg.backend, res))

    if not lin.flagged and 0 < omega < lin.omega0:
        wcases = []
        for gamma in (0.5, 1.0):
            fconst = 0.4
            shift = lin.shift

            def psi_src(t, xi, gamma=gamma):
                return shift(t) * np.asarray(xi, float) + gamma * np.exp(-omega * (t - s))

            from .problem import SemilinearTerm

            spec_src = ProblemSpec(spec.coefficients, SemilinearTerm(psi_src),
                                   spec.lyapunov, spec.window,
                                   ou_structure=spec.ou_structure, name=spec.name)
            sol = picard_solve(spec_src, lambda x: np.full_like(x, fconst),
                               s, s + horizon, cfg)
            wnorm = float(np.max(np.exp(omega * (sol.times - s)) * sol.sup_norm_trace()))
            bound = fconst + gamma / (lin.omega0 - omega)
            wcases.append(EstimateCase(
                f"gamma={gamma}", f"f={fconst}, source gamma e^(-omega(t-s))",
                wnorm, bound))
        reports.append(EstimateReport(
            "weighted_inhomogeneous_bound",
            "sup_t e^{omega(t-s)}|z(t)|_inf <= |f|_inf + |g|_omega/(omega0-omega)",
            tuple(wcases), 5e-3, cfg.backend, res,
            note=f"omega={omega}, omega0={lin.omega0:.4g}"))
    return reports


# ---------------------------------------------------------------------------
# L^p stability and hypercontractivity
# ---------------------------------------------------------------------------


def _solution_norm_lp(sol, k, mu, p, rule):
    u_k = sol.eval_at(k)
    return gaussian_lp_norm(lambda y: u_k(y), mu, p, rule)


def verify_lp_stability(spec: ProblemSpec, ps: Sequence[float] = (1.5, 2.0, 4.0),
                        horizon: float = 2.0, cfg: Optional[PicardConfig] = None,
                        measure_horizon: float = 40.0,
                        n_time_samples: int = 8) -> List[EstimateReport]:
    """L^p contraction of the linear flow and the dissipative L^p decay along
    semilinear traces, all in the moving Gaussian norms."""
    for p in ps:
        if not p > 1:
            raise InputError(f"L^p suite takes p in (1, inf), got p={p}")
    if spec.ou_structure is None:
        return [_na_report("lp_stability", "L^p estimates in the moving norms",
                           "non-OU spec: Gaussian evolution measures unavailable")]
    ou = spec.ou_structure
    cfg = cfg or _ou_picard_cfg()
    rule = QuadratureRule.gauss_hermite(d=ou.d)
    s = spec.window.s
    res = f"picard dt={cfg.dt}, GH {rule.n_per_axis}"
    reports = []

    lin_cases = []
    fam = (("x", lambda y: y), ("tanh(x)", np.tanh), ("cos(x)", lambda y: np.cos(y)))
    mu_s = ou_evolution_measure(ou, s, measure_horizon, tol=1e-8)
    for tau in np.linspace(horizon / n_time_samples, horizon, n_time_samples):
        t = s + tau
        mu_t = ou_evolution_measure(ou, t, measure_horizon, tol=1e-8)
        prop = compute_propagator(ou, s, t, 512)
        for fname, f in fam:
            for p in ps:
                gf = lambda y: apply_propagator_batch(prop, f, np.atleast_1d(y).reshape(-1, 1), rule)
                lhs = gaussian_lp_norm(gf, mu_t, p, rule)
                rhs = gaussian_lp_norm(f, mu_s, p, rule)
                lin_cases.append(EstimateCase(
                    f"contraction[f={fname},p={p},tau={tau:.3g}]",
                    f"f={fname}, p={p}, t-s={tau:.3g}", lhs / rhs, 1.0))
    reports.append(EstimateReport(
        "linear_lp_contraction",
        "|G(t,s)f|_{L^p(mu_t)} <= |f|_{L^p(mu_s)}",
        tuple(lin_cases), 0.01, "ou", res))

    nl = spec.nonlinearity
    if nl.psi0 is None:
        reports.append(_na_report(
            "semilinear_lp_decay", "|u(t)|_{L^p(mu_t)} <= e^{psi0(t-s)} |f|_{L^p(mu_s)}",
            "psi0 not claimed by the spec"))
        return reports
    # the decay theorem also needs the coefficient growth clauses; verify them
    # on samples before testing its conclusion
    if spec.lyapunov.growth_consts is None:
        reports.append(_na_report(
            "semilinear_lp_decay", "|u(t)|_{L^p(mu_t)} <= e^{psi0(t-s)} |f|_{L^p(mu_s)}",
            "no growth constants (C0, C1, C2) claimed; decay hypotheses unverified"))
        return reports
    from .problem import SamplePlan, check_growth_and_dissipativity

    growth = check_growth_and_dissipativity(
        spec, SamplePlan(s, s + horizon, radius=8.0),
        clauses=["diffusion_radial_growth", "diffusion_trace_growth",
                 "drift_radial_growth"])
    if not growth.all_passed:
        reports.append(_na_report(
            "semilinear_lp_decay", "|u(t)|_{L^p(mu_t)} <= e^{psi0(t-s)} |f|_{L^p(mu_s)}",
            f"growth clauses failed on samples: {growth.summary()}"))
        return reports

    dec_cases = []
    for fname, f in (("tanh(x)", np.tanh), ("cos(x)", lambda y: np.cos(y))):
        sol = picard_solve(spec, f, s, s + horizon, cfg)
        idxs = np.unique(np.linspace(0, len(sol.times) - 1, n_time_samples).astype(int))
        for p in ps:
            rhs0 = gaussian_lp_norm(f, mu_s, p, rule)
            for k in idxs[1:]:
                t = float(sol.times[k])
                mu_t = ou_evolution_measure(ou, t, measure_horizon, tol=1e-8)
                lhs = _solution_norm_lp(sol, k, mu_t, p, rule)
                rhs = np.exp(nl.psi0 * (t - s)) * rhs0
                dec_cases.append(EstimateCase(
                    f"decay[f={fname},p={p},t={t:.3g}]",
                    f"f={fname}, p={p}, t={t:.3g}", lhs / rhs, 1.0))
    reports.append(EstimateReport(
        "semilinear_lp_decay",
        "|u(t)|_{L^p(mu_t)} <= e^{psi0(t-s)} |f|_{L^p(mu_s)}",
        tuple(dec_cases), 0.01, "ou", res,
        note=f"psi0 = {nl.psi0}; growth clauses PASS on samples"))

    dep_cases = []
    f1, f2 = np.tanh, lambda y: np.tanh(y) + 0.05 * np.exp(-0.5 * y**2)
    sol1 = picard_solve(spec, f1, s, s + min(1.0, horizon), cfg)
    sol2 = picard_solve(spec, f2, s, s + min(1.0, horizon), cfg)
    L = sampled_lipschitz(nl.psi, [s], 3.0)
    dist0 = gaussian_lp_norm(lambda y: f1(y) - f2(y), mu_s, 2.0, rule)
    env = []
    idxs = np.unique(np.linspace(0, len(sol1.times) - 1, 6).astype(int))
    for k in idxs:
        t = float(sol1.times[k])
        mu_t = ou_evolution_measure(ou, t, measure_horizon, tol=1e-8)
        u1, u2 = sol1.eval_at(k), sol2.eval_at(k)
        d = gaussian_lp_norm(lambda y: u1(y) - u2(y), mu_t, 2.0, rule)
        env.append(d / dist0)
    K_explicit = 2.0 * np.exp(2.0 * L * min(1.0, horizon))
    dep_cases.append(EstimateCase(
        "lp_dependence", f"p=2, |f-g|_{{L^2}}={dist0:.4g}", float(np.max(env)), K_explicit))
    reports.append(EstimateReport(
        "lp_dependence",
        "sup_t |u_f - u_g|_{L^p(mu_t)} <= K |f-g|_{L^p(mu_s)} (K = 2 e^{2L(tau-s)})",
        tuple(dep_cases), 0.0, "ou", res,
        note=f"empirical envelope {float(np.max(env)):.4g}, explicit-form K {K_explicit:.4g}"))
    return reports


_LSI_GUARD = 1e-300


def _lsi_family():
    """Hermite polynomials with Gaussian dampers plus damped exponentials (the
    near-extremal members; pure exponentials need K exactly 1/2)."""
    fam = []
    for k in (1, 2, 3):
        H = np.polynomial.hermite_e.HermiteE.basis(k)
        dH = H.deriv()
        for eps in (0.05, 0.1):
            fam.append((f"H{k}*exp(-{eps}x^2)",
                        lambda y, H=H, eps=eps: H(y) * np.exp(-eps * y**2),
                        lambda y, H=H, dH=dH, eps=eps: (dH(y) - 2 * eps * y * H(y)) * np.exp(-eps * y**2)))
    for c, eps in ((0.5, 0.02), (1.0, 0.05), (-0.75, 0.03)):
        fam.append((f"exp({c}x-{eps}x^2)",
                    lambda y, c=c, eps=eps: np.exp(c * y - eps * y**2),
                    lambda y, c=c, eps=eps: (c - 2 * eps * y) * np.exp(c * y - eps * y**2)))
    return fam


def lsi_probe(mu: GaussianMeasure, gammas: Sequence[float] = (1.5, 2.0, 3.0),
              rule: Optional[QuadratureRule] = None):
    """Smallest K making the entropy-energy inequality hold on the test family.

    For each member g and exponent gamma, K_needed is the ratio of the entropy
    excess to gamma * int_{g != 0} |g|^{gamma-2} |grad g|^2 dmu; the probe
    envelope is the max over the family (a lower bound for the true constant).
    """
    rule = rule or QuadratureRule.gauss_hermite(40, 1)
    Y = (mu.mean + rule.nodes @ mu.chol().T)[:, 0]
    w = rule.weights
    cases = []
    guard_hit = False
    for name, g, dg in _lsi_family():
        gv = g(Y)
        dgv = dg(Y)
        nz = np.abs(gv) > _LSI_GUARD
        if not nz.all():
            guard_hit = True
        for gamma in gammas:
            absg = np.abs(gv[nz])
            norm_g = float(np.dot(w, np.abs(gv) ** gamma) ** (1.0 / gamma))
            entropy = float(np.dot(w[nz], absg**gamma * np.log(absg)))
            entropy -= norm_g**gamma * np.log(norm_g)
            energy = gamma * float(np.dot(w[nz], absg ** (gamma - 2.0) * dgv[nz] ** 2))
            if energy <= 0:
                continue
            K_needed = entropy / energy
            cases.append((name, gamma, K_needed))
    K_env = max(c[2] for c in cases)
    return K_env, cases, guard_hit


def verify_hypercontractivity(spec: ProblemSpec, p: float = 2.0,
                              horizon: float = 1.5,
                              K: Optional[float] = None,
                              cfg: Optional[PicardConfig] = None,
                              measure_horizon: float = 40.0) -> List[EstimateReport]:
    """LSI probe plus the norm-improving schedule check.

    The probe estimates K from a finite family (a lower envelope), so the
    schedule runs with K inflated by 10%: a larger K slows the exponent
    schedule p(t) = e^{eta0 (t-s)/K}(p-1)+1 and only weakens the claim.
    """
    if not p > 1:
        raise InputError("hypercontractivity takes p > 1")
    if spec.ou_structure is None:
        return [_na_report("hypercontractivity", "norm-improving schedule",
                           "non-OU spec: Gaussian evolution measures unavailable")]
    ou = spec.ou_structure
    cfg = cfg or _ou_picard_cfg()
    rule = QuadratureRule.gauss_hermite(d=ou.d)
    s = spec.window.s
    reports = []

    mu_probe = ou_evolution_measure(ou, s, measure_horizon, tol=1e-8)
    K_env, probe_cases, guard_hit = lsi_probe(mu_probe)
    cases = tuple(EstimateCase(f"probe[{name},gamma={gamma}]",
                               f"g={name}, gamma={gamma}", k_need, K_env)
                  for name, gamma, k_need in probe_cases)
    note = f"K lower envelope {K_env:.6g} over {len(probe_cases)} family cases"
    if guard_hit:
        note += "; |g|>1e-300 guard active at isolated zeros"
    reports.append(EstimateReport(
        "lsi_probe",
        "entropy(g) <= gamma K int |g|^{gamma-2} |grad g|^2 dmu on the family",
        cases, 1e-12, "ou", f"GH {rule.n_per_axis}", note=note))

    K_used = (K if K is not None else K_env) * 1.1
    eta0 = spec.coefficients.eta0_claimed
    nl = spec.nonlinearity
    psi0 = nl.psi0 if nl.psi0 is not None else 0.0

    def p_schedule(t):
        return np.exp(eta0 * (t - s) / K_used) * (p - 1.0) + 1.0

    ts = np.linspace(s, s + horizon, 9)
    sched = np.array([p_schedule(t) for t in ts])
    mono_cases = (
        EstimateCase("p_start", "p(s) = p", abs(sched[0] - p), 0.0),
        EstimateCase("p_increasing", "min increment of p(t)",
                     -float(np.min(np.diff(sched))), 0.0),
    )
    reports.append(EstimateReport(
        "schedule_monotonicity", "p(t) strictly increasing from p(s) = p",
        mono_cases, 1e-12, "ou", f"K_used={K_used:.6g}"))

    hyper_cases = []
    clip = 6.0
    fam = (("exp(x/2) (clipped)", lambda y: np.exp(0.5 * np.clip(y, -clip, clip))),
           ("1+tanh(x)/2", lambda y: 1.0 + 0.5 * np.tanh(y)))
    mu_s = ou_evolution_measure(ou, s, measure_horizon, tol=1e-8)
    test_spec = spec
    sol_cache = {}
    for fname, f in fam:
        rhs0 = gaussian_lp_norm(f, mu_s, p, rule)
        hyper_cases.append(EstimateCase(
            f"equal_times[{fname}]", "t=s degenerate case",
            gaussian_lp_norm(f, mu_s, p_schedule(s), rule) / rhs0, 1.0))
        sol = picard_solve(test_spec, f, s, s + horizon, cfg)
        sol_cache[fname] = sol
        idxs = np.unique(np.linspace(1, len(sol.times) - 1, 8).astype(int))
        for k in idxs:
            t = float(sol.times[k])
            mu_t = ou_evolution_measure(ou, t, measure_horizon, tol=1e-8)
            pt = p_schedule(t)
            lhs = _solution_norm_lp(sol, k, mu_t, pt, rule)
            rhs = np.exp(psi0 * (t - s)) * rhs0
            hyper_cases.append(EstimateCase(
                f"schedule[{fname},t={t:.3g}]", f"p(t)={pt:.4g}", lhs / rhs, 1.0))
    reports.append(EstimateReport(
        "hypercontractive_schedule",
        "|u(t)|_{L^{p(t)}(mu_t)} <= e^{psi0(t-s)} |f|_{L^p(mu_s)}",
        tuple(hyper_cases), 0.01, "ou",
        f"picard dt={cfg.dt}, K inflated 10% to {K_used:.6g}",
        note=f"eta0={eta0}, psi0={psi0}"))
    return reports


# ---------------------------------------------------------------------------
# Measure derivative
# ---------------------------------------------------------------------------


def _bump(r: float):
    """(1 - (x/r)^2)^8 on |x| < r: compactly supported with C^7 edges."""
    def val(x):
        x = np.asarray(x, float)
        u = np.clip(x / r, -1.0, 1.0)
        return (1.0 - u**2) ** 8

    def grad(x):
        x = np.asarray(x, float)
        u = np.clip(x / r, -1.0, 1.0)
        return -16.0 * u * (1.0 - u**2) ** 7 / r

    def hess(x):
        x = np.asarray(x, float)
        u = np.clip(x / r, -1.0, 1.0)
        return (-16.0 * (1.0 - u**2) ** 7 + 224.0 * u**2 * (1.0 - u**2) ** 6) / r**2

    return val, grad, hess


def verify_measure_derivative(spec: ProblemSpec, times: Sequence[float] = (0.5, 1.2),
                              dt_fd: float = 1e-3,
                              measure_horizon: float = 40.0,
                              amplitude: Callable = None) -> EstimateReport:
    """Centered difference of t -> int g dmu_t against the generator quadrature
    int D_t g dmu_t + int A(t) g dmu_t (the sign the constructed push-forward
    family satisfies), on bump test functions a(t) (1-(x/r)^2)^8."""
    if spec.ou_structure is None:
        return _na_report("measure_derivative",
                          "d/dt int g dmu_t = int D_t g dmu_t + int A(t) g dmu_t",
                          "non-OU spec")
    ou = spec.ou_structure
    rule = QuadratureRule.gauss_hermite(d=ou.d)
    a = amplitude or (lambda t: 1.0 + 0.5 * np.sin(t))
    da = lambda t: (a(t + 1e-6) - a(t - 1e-6)) / 2e-6

    cases = []
    for r in (5.0, 7.0):
        val, grad, hess = _bump(r)
        fld = ScalarField(lambda x: val(np.asarray(x).reshape(-1))[0],
                          lambda x: np.array([grad(np.asarray(x).reshape(-1))[0]]),
                          lambda x: np.array([[hess(np.asarray(x).reshape(-1))[0]]]))
        max_node = 11.5  # extreme Gauss-Hermite node at 40 points
        for t in times:
            mus = {dtv: ou_evolution_measure(ou, t + dtv, measure_horizon, tol=1e-8)
                   for dtv in (-dt_fd, 0.0, dt_fd)}
            for m in mus.values():
                reach = max_node * np.sqrt(m.cov[0, 0])
                if r > m.mean[0] + reach or -r < m.mean[0] - reach:
                    raise InputError(
                        f"bump support [-{r}, {r}] escapes the quadrature-resolved "
                        f"region around mean {m.mean[0]:.3g}")
            I = {dtv: a(t + dtv) * measure_integral(val, mus[dtv], rule)
                 for dtv in (-dt_fd, dt_fd)}
            lhs = (I[dt_fd] - I[-dt_fd]) / (2 * dt_fd)
            mu_t = mus[0.0]
            nodes = (mu_t.mean + rule.nodes @ mu_t.chol().T)
            Ag = apply_generator(spec, fld, t, nodes)
            rhs = da(t) * measure_integral(val, mu_t, rule) + a(t) * float(
                np.dot(rule.weights, Ag))
            cases.append(EstimateCase(
                f"bump[r={r},t={t}]", f"a(t)(1-(x/{r})^2)^8 at t={t}",
                abs(lhs - rhs), 0.0))
        # zero function: both sides vanish identically
        cases.append(EstimateCase(f"zero[r={r}]", "g = 0", 0.0, 0.0))
    return EstimateReport(
        "measure_derivative",
        "d/dt int g dmu_t = int D_t g dmu_t + int A(t) g dmu_t",
        tuple(cases), 1e-5, "ou", f"GH {rule.n_per_axis}, FD step {dt_fd}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def reports_to_markdown(reports: Sequence[EstimateReport]) -> str:
    lines = ["| suite | case | lhs | rhs | margin | tolerance | verdict |",
             "|---|---|---|---|---|---|---|"]
    for rep in sorted(reports, key=lambda r: r.name):
        if not rep.cases:
            lines.append(f"| {rep.name} | - | - | - | - | {rep.tolerance!r} | {rep.verdict} |")
        for c in sorted(rep.cases, key=lambda c: c.case_id):
            lines.append(
                f"| {rep.name} | {c.case_id} | {c.lhs!r} | {c.rhs!r} | "
                f"{c.margin!r} | {rep.tolerance!r} | {rep.verdict} |")
    notes = [f"- {r.name}: {r.note}" for r in sorted(reports, key=lambda r: r.name) if r.note]
    if notes:
        lines += ["", "Notes:", *notes]
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: Sequence[EstimateReport]) -> str:
    lines = ["suite,case,lhs,rhs,margin,tolerance,verdict"]
    for rep in sorted(reports, key=lambda r: r.name):
        if not rep.cases:
            lines.append(f"{rep.name},-,,,,{rep.tolerance!r},{rep.verdict}")
        for c in sorted(rep.cases, key=lambda c: c.case_id):
            lines.append(f"{rep.name},{c.case_id},{c.lhs!r},{c.rhs!r},"
                         f"{c.margin!r},{rep.tolerance!r},{rep.verdict}")
    return "\n".join(lines) + "\n"
