"""Problem instances: coefficients, nonlinearity, Lyapunov data, and the
numerical hypothesis validators.

Conventions
-----------
Coefficient maps are callables ``Q(t, x) -> (d, d)`` and ``b(t, x) -> (d,)``
for a single point ``x`` of shape ``(d,)``.  Vectorized implementations may
additionally accept a batch ``x`` of shape ``(n, d)`` and return ``(n, d, d)``
/ ``(n, d)``; the helpers :func:`q_batch` and :func:`b_batch` probe for that
and fall back to a point loop.  All built-in instances are vectorized.

Generator convention: ``A(t)z = Tr(Q(t,x) D^2 z) + <b(t,x), grad z>`` with no
1/2 factor in front of the diffusion term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, InputError

__all__ = [
    "CoefficientField",
    "SemilinearTerm",
    "LyapunovCertificate",
    "TimeWindow",
    "ProblemSpec",
    "ScalarField",
    "SamplePlan",
    "ClauseResult",
    "HypothesisReport",
    "apply_generator",
    "check_base_hypotheses",
    "check_growth_and_dissipativity",
]

# Relative slack below which a clause still counts as satisfied; absorbs the
# ~1 ulp cancellation noise of exact-identity certificates.
_PASS_TOL = 1e-10


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion matrix Q(t,x), drift b(t,x) and the claimed ellipticity floor."""

    d: int
    Q: Callable
    b: Callable
    eta0_claimed: float
    # Optional continuous bounds (k(t), m(t)) for the smoothness clauses:
    # |grad_x q_ij| <= k(t) eta(t,x)  and  <grad_x b xi, xi> <= m(t) |xi|^2.
    smooth_bounds: Optional[tuple] = None
    # Optional analytic derivatives; when absent, central differences are used.
    grad_Q: Optional[Callable] = None  # (t, x) -> (d, d, d), axis 0 = d/dx_k
    jac_b: Optional[Callable] = None  # (t, x) -> (d, d), [i, j] = d b_i / d x_j

    def __post_init__(self):
        if self.d < 1:
            raise InputError(f"dimension must be positive, got {self.d}")
        if not self.eta0_claimed > 0:
            raise InputError("eta0_claimed must be positive")

    def q_at(self, t, x):
        """Q(t,x) symmetrized, as an (d, d) array."""
        q = np.asarray(self.Q(t, np.asarray(x, float)), float)
        q = q.reshape(self.d, self.d)
        return 0.5 * (q + q.T)

    def b_at(self, t, x):
        return np.asarray(self.b(t, np.asarray(x, float)), float).reshape(self.d)


@dataclass(frozen=True)
class SemilinearTerm:
    """Reaction term psi(t, xi) plus whatever one-sided/growth constants are claimed."""

    psi: Callable  # (t, xi) -> float, vectorized in xi
    d_psi_at_zero: Optional[Callable] = None  # t -> d/dxi psi(t, 0)
    lipschitz_L: Optional[float] = None
    psi0: Optional[float] = None  # xi psi(t,xi) <= psi0 xi^2
    growth_k: Optional[float] = None  # xi psi(t,xi) <= k (1 + xi^2)
    linear_growth_h: Optional[float] = None  # |psi(t,xi)| <= h (1 + |xi|)

    def __call__(self, t, xi):
        return self.psi(t, xi)


@dataclass(frozen=True)
class LyapunovCertificate:
    """Coercive C^2 function phi with A(t)phi <= a - c phi.

    phi must come with analytic gradient and Hessian: the Lyapunov inequality
    feeds truncation bounds, and differentiation noise is not tolerated there.
    """

    phi: Callable  # x -> float, vectorized over (n, d)
    grad_phi: Callable  # x -> (d,)
    hess_phi: Callable  # x -> (d, d)
    a: float
    c: float
    growth_consts: Optional[tuple] = None  # (C0, C1, C2)

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0):
            raise InputError("Lyapunov constants a, c must be positive")

    def as_field(self) -> "ScalarField":
        return ScalarField(self.phi, self.grad_phi, self.hess_phi)


@dataclass(frozen=True)
class TimeWindow:
    """Working window [s, tau] inside the interval of definition.

    ``t_min`` is the left endpoint of the interval of definition (None for a
    full line).
    """

    s: float
    tau: float
    t_min: Optional[float] = None

    def __post_init__(self):
        if not self.tau > self.s:
            raise InputError(f"window needs tau > s, got [{self.s}, {self.tau}]")
        if self.t_min is not None and self.s < self.t_min:
            raise InputError("window starts before the interval of definition")


@dataclass(frozen=True)
class ProblemSpec:
    """Single source of truth for one problem instance."""

    coefficients: CoefficientField
    nonlinearity: SemilinearTerm
    lyapunov: LyapunovCertificate
    window: TimeWindow
    ou_structure: Optional[object] = None  # ou.OUCoefficients when applicable
    name: str = "custom"

    @property
    def d(self) -> int:
        return self.coefficients.d


@dataclass(frozen=True)
class ScalarField:
    """A twice differentiable scalar function given with its derivative oracles."""

    value: Callable
    gradient: Callable
    hessian: Callable


def q_batch(coeff: CoefficientField, t, X):
    """Evaluate Q(t, .) on a batch X of shape (n, d); returns (n, d, d), symmetrized."""
    X = np.atleast_2d(np.asarray(X, float))
    n, d = X.shape
    try:
        # probe for a vectorized implementation; any failure falls back to
        # the per-point contract below
        q = np.asarray(coeff.Q(t, X), float)
        if q.shape == (n, d, d):
            return 0.5 * (q + np.swapaxes(q, 1, 2))
        if d == 1 and q.shape == (n,):
            return q.reshape(n, 1, 1)
    except Exception:
        pass
    out = np.empty((n, d, d))
    for i in range(n):
        out[i] = coeff.q_at(t, X[i])
    return out


def b_batch(coeff: CoefficientField, t, X):
    """Evaluate b(t, .) on a batch X of shape (n, d); returns (n, d)."""
    X = np.atleast_2d(np.asarray(X, float))
    n, d = X.shape
    try:
        b = np.asarray(coeff.b(t, X), float)
        if b.shape == (n, d):
            return b
        if d == 1 and b.shape == (n,):
            return b.reshape(n, 1)
    except Exception:
        pass
    out = np.empty((n, d))
    for i in range(n):
        out[i] = coeff.b_at(t, X[i])
    return out


def apply_generator(spec: ProblemSpec, fld: ScalarField, t: float, points) -> np.ndarray:
    """Evaluate (A(t) z)(x) = Tr(Q(t,x) D^2 z(x)) + <b(t,x), grad z(x)> per point.

    ``points`` is an (n, d) array (or anything reshapeable to it).  The result
    is exact up to floating point given exact derivative oracles.
    """
    d = spec.d
    X = np.asarray(points, float)
    if X.ndim == 2 and X.shape[1] != d:
        raise InputError(
            f"points have dimension {X.shape[1]}, the problem has d={d}")
    X = X.reshape(-1, d)
    Q = q_batch(spec.coefficients, t, X)
    B = b_batch(spec.coefficients, t, X)
    out = np.empty(len(X))
    for i, x in enumerate(X):
        H = np.asarray(fld.hessian(x), float).reshape(d, d)
        g = np.asarray(fld.gradient(x), float).reshape(d)
        out[i] = np.trace(Q[i] @ H) + B[i] @ g
    return out


# ---------------------------------------------------------------------------
# Sampling plans and hypothesis reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePlan:
    """Where the (t, x) clauses get sampled: a time grid on [s, tau] crossed
    with an axis grid plus Halton points in the ball/box of radius R."""

    s: float
    tau: float
    radius: float
    n_time: int = 9
    n_space: int = 41
    n_quasi: int = 64
    xi_max: float = 10.0  # range for nonlinearity clauses
    n_xi: int = 201

    def times(self):
        return np.linspace(self.s, self.tau, self.n_time)

    def points(self, d: int):
        axes = [np.linspace(-self.radius, self.radius, self.n_space)] * d
        if d == 1:
            grid = axes[0].reshape(-1, 1)
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            grid = np.stack([m.ravel() for m in mesh], axis=-1)
            if d > 2:  # temper the tensor explosion
                grid = grid[:: max(1, len(grid) // 2048)]
        halton = qmc.Halton(d, scramble=False)
        extra = (2.0 * halton.random(self.n_quasi) - 1.0) * self.radius
        return np.vstack([grid, extra])

    def xi_values(self):
        return np.linspace(-self.xi_max, self.xi_max, self.n_xi)

    def describe(self) -> str:
        return (
            f"t in [{self.s}, {self.tau}] ({self.n_time} nodes); "
            f"x in [-{self.radius}, {self.radius}]^d "
            f"({self.n_space}/axis grid + {self.n_quasi} Halton)"
        )


@dataclass(frozen=True)
class ClauseResult:
    name: str
    passed: bool
    worst_slack: float
    witness_t: Optional[float] = None
    witness_x: Optional[tuple] = None
    detail: str = ""

    @property
    def violation(self) -> float:
        return max(0.0, -self.worst_slack)


@dataclass(frozen=True)
class HypothesisReport:
    clauses: tuple
    plan: str
    notes: str = ""

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"sampling: {self.plan}"]
        for c in self.clauses:
            mark = "PASS" if c.passed else "FAIL"
            w = "" if c.witness_t is None else f" at (t={c.witness_t:.6g}, x={c.witness_x})"
            lines.append(f"  [{mark}] {c.name}: worst slack {c.worst_slack:.6g}{w}")
        if self.notes:
            lines.append(self.notes)
        return "\n".join(lines)


def _clause_from_samples(name, slacks, ts, xs, detail=""):
    slacks = np.asarray(slacks, float)
    i = int(np.argmin(slacks))
    worst = float(slacks[i])
    scale = float(np.max(np.abs(slacks))) if len(slacks) else 1.0
    passed = worst >= -_PASS_TOL * max(1.0, scale)
    wt = float(ts[i]) if ts is not None else None
    wx = tuple(np.atleast_1d(xs[i]).tolist()) if xs is not None else None
    return ClauseResult(name, passed, worst, wt, wx, detail)


def _fd_step(x):
    return np.cbrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(x)))


def _grad_q_fd(coeff, t, x):
    d = coeff.d
    h = _fd_step(x)
    out = np.empty((d, d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out[k] = (coeff.q_at(t, x + e) - coeff.q_at(t, x - e)) / (2 * h)
    return out


def _jac_b_fd(coeff, t, x):
    d = coeff.d
    h = _fd_step(x)
    out = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        out[:, j] = (coeff.b_at(t, x + e) - coeff.b_at(t, x - e)) / (2 * h)
    return out


def check_base_hypotheses(spec: ProblemSpec, plan: SamplePlan) -> HypothesisReport:
    """Sample the standing hypotheses and report per-clause worst slack.

    Clauses: ellipticity floor (min eig Q >= eta0), Lyapunov coercivity
    (phi >= 0, phi increasing along an escape ladder of radii), the Lyapunov
    drift inequality A(t)phi <= a - c phi, and, when smooth_bounds is present,
    the diffusion-gradient and one-sided drift-Jacobian bounds (derivatives by
    central differences unless analytic ones are supplied).

    Violations are report content, not errors.
    """
    coeff = spec.coefficients
    lyap = spec.lyapunov
    d = spec.d
    ts = plan.times()
    X = plan.points(d)
    ntx = len(ts) * len(X)

    ell_slack, ell_t, ell_x = np.empty(ntx), np.empty(ntx), np.empty((ntx, d))
    lya_slack = np.empty(ntx)
    k = 0
    phi_field = lyap.as_field()
    for t in ts:
        Aphi = apply_generator(spec, phi_field, t, X)
        phis = np.array([float(lyap.phi(x)) for x in X])
        Q = q_batch(coeff, t, X)
        eigmin = np.linalg.eigvalsh(Q)[:, 0]
        m = len(X)
        ell_slack[k : k + m] = eigmin - coeff.eta0_claimed
        lya_slack[k : k + m] = (lyap.a - lyap.c * phis) - Aphi
        ell_t[k : k + m] = t
        ell_x[k : k + m] = X
        k += m

    clauses = [
        _clause_from_samples("ellipticity_floor", ell_slack, ell_t, ell_x,
                             detail=f"min eig Q - eta0, eta0={coeff.eta0_claimed}"),
        _clause_from_samples("lyapunov_drift", lya_slack, ell_t, ell_x,
                             detail=f"(a - c phi) - A(t)phi with a={lyap.a}, c={lyap.c}"),
    ]

    # Coercivity: phi >= 0 on samples and monotone growth along a radius ladder.
    phis = np.array([float(lyap.phi(x)) for x in X])
    clauses.append(_clause_from_samples("phi_nonnegative", phis, None, None))
    radii = plan.radius * np.geomspace(1.0, 64.0, 13)
    dirs = np.eye(d)
    ladder = np.array([min(float(lyap.phi(r * e)) for e in np.vstack([dirs, -dirs]))
                       for r in radii])
    growth = np.diff(ladder)
    clauses.append(ClauseResult(
        "phi_coercive", bool(np.all(growth > 0)),
        float(np.min(growth)) if len(growth) else 0.0,
        detail=f"min increment of phi along radii {radii[0]:.3g}..{radii[-1]:.3g}",
    ))

    if coeff.smooth_bounds is not None:
        kfun, mfun = coeff.smooth_bounds
        gq_slack, gb_slack = [], []
        wt, wx = [], []
        for t in ts:
            for x in X:
                gq = coeff.grad_Q(t, x) if coeff.grad_Q else _grad_q_fd(coeff, t, x)
                gq = np.asarray(gq, float).reshape(d, d, d)
                eta = float(np.linalg.eigvalsh(coeff.q_at(t, x))[0])
                grad_norms = np.linalg.norm(gq, axis=0)  # |grad q_ij| per (i,j)
                gq_slack.append(float(kfun(t)) * eta - float(np.max(grad_norms)))
                jb = coeff.jac_b(t, x) if coeff.jac_b else _jac_b_fd(coeff, t, x)
                jb = np.asarray(jb, float).reshape(d, d)
                lam = float(np.linalg.eigvalsh(0.5 * (jb + jb.T))[-1])
                gb_slack.append(float(mfun(t)) - lam)
                wt.append(t)
                wx.append(x)
        clauses.append(_clause_from_samples(
            "diffusion_gradient_bound", gq_slack, wt, wx,
            detail="k(t) eta(t,x) - max_ij |grad q_ij|"))
        clauses.append(_clause_from_samples(
            "drift_onesided_bound", gb_slack, wt, wx,
            detail="m(t) - max eig sym(grad b)"))

    return HypothesisReport(tuple(clauses), plan.describe())


_GROWTH_CLAUSES = ("diffusion_radial_growth", "diffusion_trace_growth",
                   "drift_radial_growth", "dissipativity_psi0",
                   "one_sided_growth_alge", "linear_growth_suff_glob")


def check_growth_and_dissipativity(
    spec: ProblemSpec, plan: SamplePlan, clauses: Optional[Sequence[str]] = None
) -> HypothesisReport:
    """Sample the coefficient growth bounds and the one-sided conditions on psi.

    Requesting a clause whose constant is absent from the spec raises
    ConfigError naming the missing field.  The report also records which
    global-existence route the instance qualifies for (linear growth of psi
    vs one-sided quadratic growth).
    """
    coeff, nl, lyap = spec.coefficients, spec.nonlinearity, spec.lyapunov
    d = spec.d
    if clauses is None:
        clauses = [c for c in _GROWTH_CLAUSES if _clause_available(spec, c)]
    out = []
    ts = plan.times()
    X = plan.points(d)
    xi = plan.xi_values()

    for name in clauses:
        if not _clause_available(spec, name):
            raise ConfigError(f"clause {name!r} needs {_clause_requirement(name)}, absent from the spec")
        if name in ("dissipativity_psi0", "one_sided_growth_alge", "linear_growth_suff_glob"):
            slacks, wt, wxi = [], [], []
            for t in ts:
                p = np.asarray(nl.psi(t, xi), float)
                if name == "dissipativity_psi0":
                    s = nl.psi0 * xi**2 - xi * p
                elif name == "one_sided_growth_alge":
                    s = nl.growth_k * (1 + xi**2) - xi * p
                else:
                    s = nl.linear_growth_h * (1 + np.abs(xi)) - np.abs(p)
                slacks.extend(s)
                wt.extend([t] * len(xi))
                wxi.extend(xi)
            out.append(_clause_from_samples(name, slacks, wt, np.asarray(wxi).reshape(-1, 1)))
        else:
            C0, C1, C2 = lyap.growth_consts
            slacks, wt, wx = [], [], []
            for t in ts:
                Q = q_batch(coeff, t, X)
                B = b_batch(coeff, t, X)
                phis = np.array([float(lyap.phi(x)) for x in X])
                r = np.linalg.norm(X, axis=1)
                if name == "diffusion_radial_growth":
                    lhs = np.linalg.norm(np.einsum("nij,nj->ni", Q, X), axis=1)
                    s = C0 * r * phis - lhs
                elif name == "diffusion_trace_growth":
                    s = C1 * (1 + r) * phis - np.trace(Q, axis1=1, axis2=2)
                else:
                    s = C2 * r * phis - np.einsum("ni,ni->n", B, X)
                slacks.extend(s)
                wt.extend([t] * len(X))
                wx.extend(X)
            out.append(_clause_from_samples(name, slacks, wt, wx))

    routes = []
    by_name = {c.name: c for c in out}
    if "linear_growth_suff_glob" in by_name and by_name["linear_growth_suff_glob"].passed:
        routes.append("global existence via linear growth of psi")
    if "one_sided_growth_alge" in by_name and by_name["one_sided_growth_alge"].passed:
        routes.append("global existence via one-sided quadratic growth")
    if "dissipativity_psi0" in by_name and by_name["dissipativity_psi0"].passed:
        routes.append(f"dissipative with psi0={nl.psi0} (implies one-sided growth)")
    notes = "; ".join(routes) if routes else "no global-existence route verified on samples"
    return HypothesisReport(tuple(out), plan.describe(), notes)


def _clause_available(spec, name):
    nl, lyap = spec.nonlinearity, spec.lyapunov
    if name == "dissipativity_psi0":
        return nl.psi0 is not None
    if name == "one_sided_growth_alge":
        return nl.growth_k is not None
    if name == "linear_growth_suff_glob":
        return nl.linear_growth_h is not None
    return lyap.growth_consts is not None


def _clause_requirement(name):
    return {
        "dissipativity_psi0": "nonlinearity.psi0",
        "one_sided_growth_alge": "nonlinearity.growth_k",
        "linear_growth_suff_glob": "nonlinearity.linear_growth_h",
    }.get(name, "lyapunov.growth_consts")
