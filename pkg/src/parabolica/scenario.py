"""Scenario files: a TOML-compatible subset (tables, strings, numbers,
booleans, arrays) describing one problem + run + output configuration.

Sections:

  [problem]           builtin = "ou1d" | inline d, Q, b, eta0 (+ psi and the
                      claimed constants psi0, lipschitz_L, growth_k,
                      linear_growth_h).  Coefficient expressions use t and
                      x1..xd; psi uses t and u.
  [problem.ou]        optional q, B, f expressions in t: declares the OU
                      structure and enables the closed-form backend.
  [problem.lyapunov]  r, a, c (+ optional growth_consts [C0, C1, C2]) for the
                      certificate family phi = (1+|x|^2)^r.
  [run]               command (validate | evolve-linear | solve | measures |
                      verify | oracle-compare), backend (ou | grid | mc),
                      window [s, tau], suite, seed, resolutions, initial data.
  [output]            directory, formats (["csv", "md"]).

Round-trip contract: serialize_scenario(parse_scenario(text)) reparses to an
equal Scenario.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError, ParseError
from .expr import compile_expression
from .instances import BUILTIN_NAMES, builtin_problem, power_lyapunov, zero_nonlinearity
from .ou import OUCoefficients
from .problem import CoefficientField, ProblemSpec, SemilinearTerm, TimeWindow

__all__ = ["Scenario", "parse_scenario", "serialize_scenario", "build_problem"]

_COMMANDS = ("validate", "evolve-linear", "solve", "measures", "verify", "oracle-compare")
_SUITES = ("linear", "sup-stability", "lp", "hyper", "measure-derivative", "all")
_BACKENDS = ("ou", "grid", "mc")


@dataclass(frozen=True)
class Scenario:
    problem: dict
    run: dict
    output: dict


def _require(cond, msg):
    if not cond:
        raise ParseError(msg)


def _validate_problem(p: dict):
    if "builtin" in p:
        _require(p["builtin"] in BUILTIN_NAMES,
                 f"problem.builtin: unknown name {p['builtin']!r}; known: {BUILTIN_NAMES}")
        d = 1
    else:
        for key in ("d", "Q", "b"):
            _require(key in p, f"problem.{key}: required for inline problems")
        d = int(p["d"])
        _require(d in (1, 2), f"problem.d: supported dimensions are 1 and 2, got {d}")
        xvars = ("t",) + tuple(f"x{i+1}" for i in range(d))
        for key in ("Q", "b"):
            entries = p[key]
            flat = []
            if isinstance(entries, str):
                flat = [entries]
            elif isinstance(entries, list):
                for row in entries:
                    flat.extend(row if isinstance(row, list) else [row])
            for src in flat:
                compile_expression(src, xvars)  # rejects bad syntax/identifiers
    if "psi" in p:
        compile_expression(p["psi"], ("t", "u"))
    if "d_psi_at_zero" in p:
        compile_expression(p["d_psi_at_zero"], ("t",))
    ou = p.get("ou")
    if ou is not None:
        for key in ("q", "B", "f"):
            _require(key in ou, f"problem.ou.{key}: required when [problem.ou] is present")
            compile_expression(ou[key], ("t",))
    lyap = p.get("lyapunov")
    if lyap is not None:
        for key in ("r", "a", "c"):
            _require(key in lyap, f"problem.lyapunov.{key}: required")
            _require(float(lyap[key]) > 0, f"problem.lyapunov.{key}: must be positive")


def _validate_run(r: dict):
    _require("command" in r, "run.command: required")
    _require(r["command"] in _COMMANDS,
             f"run.command: {r['command']!r} not in {_COMMANDS}")
    if "suite" in r:
        _require(r["suite"] in _SUITES, f"run.suite: {r['suite']!r} not in {_SUITES}")
    if "backend" in r:
        _require(r["backend"] in _BACKENDS,
                 f"run.backend: {r['backend']!r} not in {_BACKENDS}")
    if "window" in r:
        w = r["window"]
        _require(isinstance(w, list) and len(w) == 2,
                 "run.window: expected [s, tau]")
        _require(float(w[1]) > float(w[0]), "run.window: needs tau > s")
    if "initial" in r:
        compile_expression(r["initial"], ("x1", "x2"))
    for f in r.get("f_set", []):
        compile_expression(f, ("x1", "x2"))


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; expressions are compiled (and
    therefore syntax- and identifier-checked) during validation."""
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ParseError(f"scenario syntax error: {exc}") from exc
    _require("problem" in doc, "missing [problem] section")
    _require("run" in doc, "missing [run] section")
    problem = doc["problem"]
    run = doc["run"]
    output = doc.get("output", {})
    _validate_problem(problem)
    _validate_run(run)
    return Scenario(problem, run, output)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value of type {type(v)!r}")


def _emit_table(name: str, table: dict, lines: list):
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    subs = {k: v for k, v in table.items() if isinstance(v, dict)}
    if scalars or not subs:
        lines.append(f"[{name}]")
        for k in sorted(scalars):
            lines.append(f"{k} = {_toml_value(scalars[k])}")
        lines.append("")
    for k in sorted(subs):
        _emit_table(f"{name}.{k}", subs[k], lines)


def serialize_scenario(sc: Scenario) -> str:
    lines = []
    _emit_table("problem", sc.problem, lines)
    _emit_table("run", sc.run, lines)
    if sc.output:
        _emit_table("output", sc.output, lines)
    return "\n".join(lines).rstrip() + "\n"


def _inline_problem(p: dict) -> ProblemSpec:
    d = int(p["d"])
    xvars = tuple(f"x{i+1}" for i in range(d))

    def env_of(t, x):
        x = np.asarray(x, float)
        if x.ndim == 2:
            return {"t": t, **{f"x{i+1}": x[:, i] for i in range(d)}}
        x = x.reshape(d)
        return {"t": t, **{f"x{i+1}": x[i] for i in range(d)}}

    qsrc = p["Q"]
    if isinstance(qsrc, str):
        qexprs = [[compile_expression(qsrc, ("t",) + xvars)]]
    else:
        qexprs = [[compile_expression(e, ("t",) + xvars) for e in row] for row in qsrc]
    _require(len(qexprs) == d and all(len(r) == d for r in qexprs),
             f"problem.Q: expected a {d}x{d} matrix of expressions")

    bsrc = p["b"]
    bexprs = [compile_expression(e, ("t",) + xvars)
              for e in ([bsrc] if isinstance(bsrc, str) else bsrc)]
    _require(len(bexprs) == d, f"problem.b: expected {d} expressions")

    def Q(t, x):
        env = env_of(t, x)
        batch = np.asarray(x, float).ndim == 2
        n = len(np.asarray(x)) if batch else 1
        out = np.empty((n, d, d))
        for i in range(d):
            for j in range(d):
                out[:, i, j] = np.broadcast_to(qexprs[i][j](**env), (n,))
        return out if batch else out[0]

    def b(t, x):
        env = env_of(t, x)
        batch = np.asarray(x, float).ndim == 2
        n = len(np.asarray(x)) if batch else 1
        out = np.empty((n, d))
        for i in range(d):
            out[:, i] = np.broadcast_to(bexprs[i](**env), (n,))
        return out if batch else out[0]

    coeff = CoefficientField(d=d, Q=Q, b=b, eta0_claimed=float(p.get("eta0", 1.0)))
    lyap_cfg = p.get("lyapunov", {"r": 1.0, "a": 4.0, "c": 2.0})
    gc = lyap_cfg.get("growth_consts")
    lyap = power_lyapunov(d, r=float(lyap_cfg["r"]), a=float(lyap_cfg["a"]),
                          c=float(lyap_cfg["c"]),
                          growth_consts=tuple(gc) if gc else None)
    return ProblemSpec(coeff, zero_nonlinearity(), lyap, TimeWindow(0.0, 1.0),
                       name="inline")


def _ou_from_block(ou_cfg: dict, d: int) -> OUCoefficients:
    q_e = compile_expression(ou_cfg["q"], ("t",))
    B_e = compile_expression(ou_cfg["B"], ("t",))
    f_e = compile_expression(ou_cfg["f"], ("t",))
    return OUCoefficients(
        d=d,
        q=lambda t: np.array([[float(q_e(t=t))]]),
        B=lambda t: np.array([[float(B_e(t=t))]]),
        fvec=lambda t: np.array([float(f_e(t=t))]),
    )


def build_problem(sc: Scenario) -> ProblemSpec:
    """Materialize the ProblemSpec a scenario describes."""
    p = sc.problem
    if "builtin" in p:
        params = {k: p[k] for k in ("l", "m", "r", "a", "c") if k in p}
        spec = builtin_problem(p["builtin"], **params)
    else:
        spec = _inline_problem(p)
        if p.get("ou") is not None:
            _require(spec.d == 1, "problem.ou: closed-form structure supported for d=1")
            spec = ProblemSpec(spec.coefficients, spec.nonlinearity, spec.lyapunov,
                               spec.window, ou_structure=_ou_from_block(p["ou"], spec.d),
                               name=spec.name)

    if "psi" in p or any(k in p for k in ("psi0", "lipschitz_L", "growth_k",
                                          "linear_growth_h", "d_psi_at_zero")):
        if "psi" in p:
            psi_e = compile_expression(p["psi"], ("t", "u"))

            def psi(t, xi):
                return np.asarray(psi_e(t=t, u=np.asarray(xi, float)), float)
        else:
            psi = spec.nonlinearity.psi
        dpsi = None
        if "d_psi_at_zero" in p:
            dpsi_e = compile_expression(p["d_psi_at_zero"], ("t",))
            dpsi = lambda t: float(dpsi_e(t=t))
        nl = SemilinearTerm(
            psi, d_psi_at_zero=dpsi,
            lipschitz_L=p.get("lipschitz_L"), psi0=p.get("psi0"),
            growth_k=p.get("growth_k"), linear_growth_h=p.get("linear_growth_h"))
        spec = ProblemSpec(spec.coefficients, nl, spec.lyapunov, spec.window,
                           ou_structure=spec.ou_structure, name=spec.name)

    w = sc.run.get("window")
    if w is not None:
        spec = ProblemSpec(spec.coefficients, spec.nonlinearity, spec.lyapunov,
                           TimeWindow(float(w[0]), float(w[1])),
                           ou_structure=spec.ou_structure, name=spec.name)
    return spec
