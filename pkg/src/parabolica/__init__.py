"""Numerics for nonautonomous semilinear parabolic problems with unbounded
coefficients: closed-form OU evolution operators, Dirichlet grid evolution,
Feynman-Kac Monte Carlo, Picard mild solutions, and estimate suites."""

from .instances import builtin_problem
from .ou import GaussianMeasure, OUCoefficients, QuadratureRule, apply_ou
from .problem import (
    CoefficientField,
    LyapunovCertificate,
    ProblemSpec,
    SemilinearTerm,
    TimeWindow,
)
from .semilinear import MildSolution, PicardConfig, continue_solution, picard_solve
from .verify import EstimateReport

__version__ = "0.1.0"

__all__ = [
    "builtin_problem",
    "GaussianMeasure",
    "OUCoefficients",
    "QuadratureRule",
    "apply_ou",
    "CoefficientField",
    "LyapunovCertificate",
    "ProblemSpec",
    "SemilinearTerm",
    "TimeWindow",
    "MildSolution",
    "PicardConfig",
    "continue_solution",
    "picard_solve",
    "EstimateReport",
    "__version__",
]
