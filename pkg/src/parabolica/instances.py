"""Built-in named problem instances.

 - "ou1d":       1-d standard Ornstein-Uhlenbeck (Q=1, b=-x), phi = 1+x^2.
 - "ou_timedep": q(t) = 2+sin t, b(t,x) = -x + cos t (time-periodic shift).
 - "polycoef":   Q = q(t)(1+|x|^2)^l Q0, b = -b(t) x (1+|x|^2)^m, with the
                 Lyapunov family phi = (1+|x|^2)^r; defaults l=0, m=1, r=1.
 - "heat1d":     Q=1, b=0 - kept as the canonical instance whose claimed
                 Lyapunov certificate fails at large |x|.

All coefficient callables are vectorized over point batches.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .ou import OUCoefficients
from .problem import (
    CoefficientField,
    LyapunovCertificate,
    ProblemSpec,
    SemilinearTerm,
    TimeWindow,
)

__all__ = ["builtin_problem", "power_lyapunov", "zero_nonlinearity", "BUILTIN_NAMES"]

BUILTIN_NAMES = ("ou1d", "ou_timedep", "polycoef", "heat1d")


def power_lyapunov(d: int, r: float = 1.0, a: float = 4.0, c: float = 2.0,
                   growth_consts=None) -> LyapunovCertificate:
    """Certificate phi(x) = (1 + |x|^2)^r with closed-form derivatives."""

    def phi(x):
        x = np.asarray(x, float)
        if x.ndim <= 1:
            return (1.0 + np.dot(x, x)) ** r
        return (1.0 + np.sum(x * x, axis=-1)) ** r

    def grad(x):
        x = np.asarray(x, float).reshape(d)
        s = 1.0 + np.dot(x, x)
        return 2.0 * r * s ** (r - 1.0) * x

    def hess(x):
        x = np.asarray(x, float).reshape(d)
        s = 1.0 + np.dot(x, x)
        out = 2.0 * r * s ** (r - 1.0) * np.eye(d)
        out += 4.0 * r * (r - 1.0) * s ** (r - 2.0) * np.outer(x, x)
        return out

    return LyapunovCertificate(phi, grad, hess, a, c, growth_consts)


def zero_nonlinearity() -> SemilinearTerm:
    def psi(t, xi):
        return np.zeros_like(np.asarray(xi, float))

    return SemilinearTerm(psi, d_psi_at_zero=lambda t: 0.0, lipschitz_L=0.0, psi0=0.0,
                          growth_k=0.0, linear_growth_h=0.0)


def _const_diffusion(d, value=1.0):
    def Q(t, x):
        x = np.asarray(x, float)
        if x.ndim == 2:
            return np.broadcast_to(value * np.eye(d), (len(x), d, d)).copy()
        return value * np.eye(d)

    return Q


def _ou1d() -> ProblemSpec:
    def b(t, x):
        return -np.asarray(x, float)

    coeff = CoefficientField(
        d=1, Q=_const_diffusion(1), b=b, eta0_claimed=1.0,
        smooth_bounds=(lambda t: 0.0, lambda t: -1.0),
        grad_Q=lambda t, x: np.zeros((1, 1, 1)),
        jac_b=lambda t, x: -np.eye(1),
    )
    lyap = power_lyapunov(1, r=1.0, a=4.0, c=2.0, growth_consts=(1.0, 1.0, 1.0))
    ou = OUCoefficients(
        d=1,
        q=lambda t: np.array([[1.0]]),
        B=lambda t: np.array([[-1.0]]),
        fvec=lambda t: np.zeros(1),
    )
    return ProblemSpec(coeff, zero_nonlinearity(), lyap, TimeWindow(0.0, 1.0),
                       ou_structure=ou, name="ou1d")


def _ou_timedep() -> ProblemSpec:
    def Q(t, x):
        x = np.asarray(x, float)
        v = 2.0 + np.sin(t)
        if x.ndim == 2:
            return np.full((len(x), 1, 1), v)
        return np.array([[v]])

    def b(t, x):
        return -np.asarray(x, float) + np.cos(t)

    coeff = CoefficientField(
        d=1, Q=Q, b=b, eta0_claimed=1.0,
        smooth_bounds=(lambda t: 0.0, lambda t: -1.0),
        grad_Q=lambda t, x: np.zeros((1, 1, 1)),
        jac_b=lambda t, x: -np.eye(1),
    )
    # A(t)phi = 2q(t) - 2x^2 + 2x cos t <= 6 - 2x^2 + 2|x| <= 8 - x^2 - ... ;
    # a=8, c=1 leaves nonnegative slack for all x (8 - (1+x^2) - (6 - 2x^2 + 2|x|)
    # = 1 + x^2 - 2|x| = (|x|-1)^2 >= 0).
    lyap = power_lyapunov(1, r=1.0, a=8.0, c=1.0, growth_consts=(3.0, 3.0, 1.0))
    ou = OUCoefficients(
        d=1,
        q=lambda t: np.array([[2.0 + np.sin(t)]]),
        B=lambda t: np.array([[-1.0]]),
        fvec=lambda t: np.array([np.cos(t)]),
    )
    return ProblemSpec(coeff, zero_nonlinearity(), lyap, TimeWindow(0.0, 1.0),
                       ou_structure=ou, name="ou_timedep")


def _polycoef(l: float = 0.0, m: float = 1.0, r: float = 1.0,
              a: float = 4.0, c: float = 2.0) -> ProblemSpec:
    """Polynomially growing coefficients; m > l-1 keeps the drift dominant."""
    if m <= l - 1.0:
        raise ConfigError(f"polycoef needs m > l-1 for a valid certificate, got l={l}, m={m}")

    def Q(t, x):
        x = np.asarray(x, float)
        if x.ndim == 2:
            s = (1.0 + np.sum(x * x, axis=-1)) ** l
            return s[:, None, None] * np.eye(x.shape[1])
        s = (1.0 + np.dot(x, x)) ** l
        return s * np.eye(len(np.atleast_1d(x)))

    def b(t, x):
        x = np.asarray(x, float)
        if x.ndim == 2:
            s = (1.0 + np.sum(x * x, axis=-1)) ** m
            return -x * s[:, None]
        return -x * (1.0 + np.dot(x, x)) ** m

    def jac_b(t, x):
        x = np.asarray(x, float).reshape(-1)
        d = len(x)
        s = 1.0 + np.dot(x, x)
        return -(s**m * np.eye(d) + 2.0 * m * s ** (m - 1.0) * np.outer(x, x))

    grad_Q = None
    if l == 0.0:
        def grad_Q(t, x):  # noqa: F811 - constant diffusion has zero gradient
            d = len(np.atleast_1d(x))
            return np.zeros((d, d, d))

    coeff = CoefficientField(
        d=1, Q=Q, b=b, eta0_claimed=1.0,
        smooth_bounds=((lambda t: 0.0) if l == 0.0 else (lambda t: 2.0 * abs(l)),
                       lambda t: -1.0),
        grad_Q=grad_Q, jac_b=jac_b,
    )
    lyap = power_lyapunov(1, r=r, a=a, c=c, growth_consts=(1.0, 1.0, 1.0))
    return ProblemSpec(coeff, zero_nonlinearity(), lyap, TimeWindow(0.0, 1.0),
                       ou_structure=None, name="polycoef")


def _heat1d() -> ProblemSpec:
    def b(t, x):
        return np.zeros_like(np.asarray(x, float))

    coeff = CoefficientField(
        d=1, Q=_const_diffusion(1), b=b, eta0_claimed=1.0,
        smooth_bounds=(lambda t: 0.0, lambda t: 0.0),
        grad_Q=lambda t, x: np.zeros((1, 1, 1)),
        jac_b=lambda t, x: np.zeros((1, 1)),
    )
    lyap = power_lyapunov(1, r=1.0, a=4.0, c=2.0)
    return ProblemSpec(coeff, zero_nonlinearity(), lyap, TimeWindow(0.0, 1.0),
                       ou_structure=None, name="heat1d")


_BUILDERS = {
    "ou1d": _ou1d,
    "ou_timedep": _ou_timedep,
    "polycoef": _polycoef,
    "heat1d": _heat1d,
}


def builtin_problem(name: str, psi: SemilinearTerm = None,
                    window: TimeWindow = None, **params) -> ProblemSpec:
    """Construct a named instance, optionally overriding nonlinearity/window.

    ``params`` are forwarded to the builder (polycoef takes l, m, r, a, c).
    """
    if name not in _BUILDERS:
        raise ConfigError(f"unknown built-in problem {name!r}; known: {BUILTIN_NAMES}")
    spec = _BUILDERS[name](**params)
    if psi is not None or window is not None:
        spec = ProblemSpec(
            spec.coefficients,
            psi if psi is not None else spec.nonlinearity,
            spec.lyapunov,
            window if window is not None else spec.window,
            ou_structure=spec.ou_structure,
            name=spec.name,
        )
    return spec
