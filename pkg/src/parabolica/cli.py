"""Scenario-driven command line front end.

    parabolica <command> --scenario <file> [--out <dir>] [--seed <u64>]
               [--threads <n>]

Commands: validate, evolve-linear, solve, measures, verify, oracle-compare,
or `run` to take the command from the scenario's [run] table.  Exit status:
0 when all verify suites PASS (or the run completed, for other commands),
2 when a verify run produced only NOT-APPLICABLE outcomes, 1 on failures.

Outputs are deterministic: identical scenario + seed produce byte-identical
CSV files.  --threads (fallback: PARABOLICA_THREADS) is recorded in the run
summary; the numerical kernels are value-deterministic regardless of it.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigError, ParabolicaError
from .expr import compile_expression
from .grid import Grid, SchemeConfig, propagate_linear
from .mc import SDEConfig, estimate_propagator, sample_measure, simulate
from .ou import QuadratureRule, apply_ou, ou_evolution_measure
from .problem import SamplePlan, check_base_hypotheses, check_growth_and_dissipativity
from .scenario import Scenario, build_problem, parse_scenario
from .semilinear import PicardConfig, continue_solution
from .verify import (
    EstimateCase,
    EstimateReport,
    reports_to_csv,
    reports_to_markdown,
    verify_hypercontractivity,
    verify_linear_estimates,
    verify_lp_stability,
    verify_measure_derivative,
    verify_sup_stability,
)

__all__ = ["main", "run_scenario", "emit_report"]


def emit_report(reports: Sequence[EstimateReport], out_dir, formats=("csv", "md"),
                basename: str = "report") -> List[Path]:
    """Write the report files (stable ordering, deterministic bytes)."""
    if not reports:
        raise ConfigError("emit_report needs a nonempty report list")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out / f"{basename}.csv"
        p.write_text(reports_to_csv(reports))
        written.append(p)
    if "md" in formats:
        p = out / f"{basename}.md"
        p.write_text(reports_to_markdown(reports))
        written.append(p)
    return written


def _initial_fn(sc: Scenario, d: int):
    src = sc.run.get("initial", "exp(-x1^2)")
    e = compile_expression(src, ("x1", "x2"))
    if d == 1:
        return lambda x: np.asarray(e(x1=np.asarray(x, float), x2=0.0), float)
    return lambda X: np.asarray(
        e(x1=np.asarray(X)[:, 0], x2=np.asarray(X)[:, 1]), float)


def _picard_cfg(sc: Scenario, spec) -> PicardConfig:
    r = sc.run
    backend = r.get("backend", "ou" if spec.ou_structure is not None else "grid")
    if backend == "mc":
        raise ConfigError("solve takes backend 'ou' or 'grid'")
    kw = dict(backend=backend, dt=float(r.get("dt", 1e-3)),
              delta=float(r.get("delta", 0.25)),
              lattice_n=int(r.get("lattice_n", 161)),
              quad_n=int(r.get("quad_n", 24)))
    if backend == "grid":
        g = Grid(spec.d, float(r.get("grid_radius", 8.0)), int(r.get("grid_n", 257)))
        kw["grid"] = g
        kw["scheme"] = SchemeConfig(float(r.get("theta", 0.5)), kw["dt"])
    return PicardConfig(**kw)


def _hyp_rows(report):
    rows = []
    for c in report.clauses:
        witness = "" if c.witness_t is None else \
            f"t={c.witness_t!r};x={';'.join(repr(v) for v in c.witness_x)}"
        rows.append(f"{c.name},{'PASS' if c.passed else 'FAIL'},{c.worst_slack!r},{witness}")
    return rows


def _cmd_validate(spec, sc: Scenario, out: Path, formats) -> int:
    w = spec.window
    radius = float(sc.run.get("sample_radius", 10.0))
    plan = SamplePlan(w.s, w.tau, radius=radius)
    base = check_base_hypotheses(spec, plan)
    growth = check_growth_and_dissipativity(spec, plan)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in formats:
        lines = ["clause,verdict,worst_slack,witness"]
        lines += _hyp_rows(base) + _hyp_rows(growth)
        (out / "hypotheses.csv").write_text("\n".join(lines) + "\n")
    if "md" in formats:
        text = (f"# Hypothesis validation: {spec.name}\n\n"
                f"{base.summary()}\n\n{growth.summary()}\n")
        (out / "hypotheses.md").write_text(text)
    return 0


def _cmd_evolve_linear(spec, sc: Scenario, out: Path, formats) -> int:
    w = spec.window
    f = _initial_fn(sc, spec.d)
    backend = sc.run.get("backend", "grid")
    out.mkdir(parents=True, exist_ok=True)
    if backend == "ou":
        if spec.ou_structure is None:
            raise ConfigError("backend 'ou' needs OU structure on the problem")
        rule = QuadratureRule.gauss_hermite(int(sc.run.get("quad_n", 40)), spec.d)
        xs = np.linspace(-8.0, 8.0, int(sc.run.get("grid_n", 257)))
        vals = [apply_ou(spec.ou_structure, f, [x], w.s, w.tau, rule) for x in xs]
        lines = [",".join(repr(float(x)) for x in xs),
                 ",".join(repr(float(v)) for v in vals)]
        (out / "field.csv").write_text("\n".join(lines) + "\n")
        (out / "evolve_summary.md").write_text(
            f"# evolve-linear (closed form)\n\nwindow [{w.s}, {w.tau}], "
            f"{rule.n_per_axis} quadrature nodes/axis\n")
        return 0
    g = Grid(spec.d, float(sc.run.get("grid_radius", 8.0)), int(sc.run.get("grid_n", 257)))
    cfg = SchemeConfig(float(sc.run.get("theta", 0.5)), float(sc.run.get("dt", g.h)))
    fld, bound = propagate_linear(spec, f, w.s, w.tau, g, cfg)
    (out / "field.csv").write_text(fld.to_csv())
    (out / "evolve_summary.md").write_text(
        f"# evolve-linear (grid)\n\nwindow [{w.s}, {w.tau}], n={g.n}, R={g.radius}, "
        f"theta={cfg.theta}, dt={cfg.dt}\n\n"
        f"truncation: rho={bound.rho!r}, epsilon_tail={bound.epsilon_tail!r}\n"
        f"({bound.provenance})\n"
        + (f"\nwarnings: {fld.meta}\n" if fld.meta else ""))
    return 0


def _cmd_solve(spec, sc: Scenario, out: Path, formats) -> int:
    w = spec.window
    f = _initial_fn(sc, spec.d)
    cfg = _picard_cfg(sc, spec)
    sol = continue_solution(spec, f, w.s, w.tau, cfg)
    out.mkdir(parents=True, exist_ok=True)
    trace_points = sc.run.get("trace_points", [0.0])
    (out / "solution.csv").write_text(sol.to_csv(trace_points=[
        [p] if np.isscalar(p) else p for p in trace_points]))
    lines = [f"# solve: {spec.name}", "",
             f"status: {sol.status}",
             f"backend: {sol.backend}",
             f"slabs: {len(sol.iterations)}, iterations: {sol.iterations}"]
    if sol.blowup_bracket is not None:
        lo, hi = sol.blowup_bracket
        lines.append(f"blow-up bracket: [{lo!r}, {hi!r}]")
    if sol.meta:
        lines.append(f"meta: {sol.meta}")
    (out / "solve_summary.md").write_text("\n".join(lines) + "\n")
    # blow-up is a result; a Picard stall is not a completed run
    return 0 if sol.status in ("completed", "blowup_detected") else 1


def _cmd_measures(spec, sc: Scenario, out: Path, formats, seed) -> int:
    w = spec.window
    backend = sc.run.get("backend", "ou" if spec.ou_structure is not None else "mc")
    horizon = float(sc.run.get("horizon", 40.0))
    out.mkdir(parents=True, exist_ok=True)
    if backend == "ou":
        if spec.ou_structure is None:
            raise ConfigError("backend 'ou' needs OU structure on the problem")
        mu = ou_evolution_measure(spec.ou_structure, w.tau, horizon,
                                  tol=float(sc.run.get("tol", 1e-8)))
        lines = ["quantity,value"]
        for i, m in enumerate(mu.mean):
            lines.append(f"mean_{i+1},{float(m)!r}")
        for i in range(mu.d):
            for j in range(mu.d):
                lines.append(f"cov_{i+1}{j+1},{float(mu.cov[i, j])!r}")
        (out / "measure.csv").write_text("\n".join(lines) + "\n")
        return 0
    cfg = SDEConfig(dt=float(sc.run.get("dt", 2e-3)),
                    n_paths=int(sc.run.get("n_paths", 20000)), seed=seed)
    horizon = float(sc.run.get("horizon", 12.0))
    ens, report = sample_measure(spec, w.tau, horizon, cfg)
    lines = ["rho,tail_mass"]
    for rho, mass in zip(report["rho"], report["tail_mass"]):
        lines.append(f"{float(rho)!r},{float(mass)!r}")
    (out / "tail_report.csv").write_text("\n".join(lines) + "\n")
    (out / "measure_summary.md").write_text(
        f"# measures ({report['label']})\n\n"
        f"phi mean {report['phi_mean']!r} +- {report['phi_stderr']!r} "
        f"vs a/c = {report['phi_bound_a_over_c']!r}\n")
    if sc.run.get("dump_ensemble", False):
        (out / "ensemble.csv").write_text(ens.to_csv())
    return 0


def _verify_exit_code(reports) -> int:
    verdicts = [r.verdict for r in reports]
    if any(v == "FAIL" for v in verdicts):
        return 1
    if verdicts and all(v == "NOT-APPLICABLE" for v in verdicts):
        return 2
    return 0


def _cmd_verify(spec, sc: Scenario, out: Path, formats, seed) -> int:
    suite = sc.run.get("suite", "all")
    horizon = float(sc.run.get("horizon", 3.0))
    reports = []
    if suite in ("linear", "all"):
        reports += verify_linear_estimates(spec, backend=sc.run.get("backend", "ou"),
                                           seed=seed)
    if suite in ("sup-stability", "all"):
        reports += verify_sup_stability(spec, horizon=horizon, seed=seed,
                                        n_pairs=int(sc.run.get("n_pairs", 10)))
    if suite in ("lp", "all"):
        reports += verify_lp_stability(spec, horizon=min(horizon, 2.0))
    if suite in ("hyper", "all"):
        reports += verify_hypercontractivity(spec, horizon=min(horizon, 1.5))
    if suite in ("measure-derivative", "all"):
        reports.append(verify_measure_derivative(spec))
    emit_report(reports, out, formats)
    return _verify_exit_code(reports)


def _cmd_oracle_compare(spec, sc: Scenario, out: Path, formats, seed) -> int:
    if spec.ou_structure is None:
        raise ConfigError("oracle-compare needs the closed-form backend (OU structure)")
    w = spec.window
    rule = QuadratureRule.gauss_hermite(int(sc.run.get("quad_n", 40)), spec.d)
    dt = float(sc.run.get("dt", 1e-3))
    n_paths = int(sc.run.get("n_paths", 100000))
    cfg = SDEConfig(dt=dt, n_paths=n_paths, seed=seed)
    f_srcs = sc.run.get("f_set", ["x1", "x1^2", "cos(x1)"])
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(int(sc.run.get("n_points", 3))):
        x = float(rng.uniform(-2, 2))
        ens = simulate(spec, [x], w.s, w.tau, cfg)
        for src in f_srcs:
            e = compile_expression(src, ("x1",))
            f = lambda y: np.asarray(e(x1=np.asarray(y, float)), float)
            closed = apply_ou(spec.ou_structure, f, [x], w.s, w.tau, rule)
            est, se = estimate_propagator(spec, f, [x], w.s, w.tau, cfg, ensemble=ens)
            cases.append(EstimateCase(
                f"agree[{src},x={x:.3g}]", f"f={src}, x={x:.3g}",
                abs(est - closed), 3.0 * se + 2.0 * dt))
    rep = EstimateReport(
        "oracle_agreement", "|MC estimate - closed form| <= 3 stderr + 2 dt",
        tuple(cases), 0.0, "mc vs ou", f"n={n_paths}, dt={dt}, GH {rule.n_per_axis}")
    emit_report([rep], out, formats)
    return _verify_exit_code([rep])


def run_scenario(sc: Scenario, command: Optional[str] = None,
                 out_dir: Optional[str] = None, seed: Optional[int] = None,
                 threads: Optional[int] = None) -> int:
    """Dispatch a parsed scenario; returns the process exit code."""
    command = command or sc.run.get("command")
    if command not in ("validate", "evolve-linear", "solve", "measures",
                       "verify", "oracle-compare"):
        raise ConfigError(f"unknown command {command!r}")
    spec = build_problem(sc)
    out = Path(out_dir if out_dir is not None else sc.output.get("directory", "."))
    formats = tuple(sc.output.get("formats", ["csv", "md"]))
    seed = int(seed if seed is not None else sc.run.get("seed", 0))
    if command == "validate":
        return _cmd_validate(spec, sc, out, formats)
    if command == "evolve-linear":
        return _cmd_evolve_linear(spec, sc, out, formats)
    if command == "solve":
        return _cmd_solve(spec, sc, out, formats)
    if command == "measures":
        return _cmd_measures(spec, sc, out, formats, seed)
    if command == "verify":
        return _cmd_verify(spec, sc, out, formats, seed)
    return _cmd_oracle_compare(spec, sc, out, formats, seed)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="parabolica",
        description="Desk-scale solvers and estimate checkers for nonautonomous "
                    "semilinear parabolic problems with unbounded coefficients.")
    parser.add_argument("command",
                        choices=["validate", "evolve-linear", "solve", "measures",
                                 "verify", "oracle-compare", "run"],
                        help="operation to perform ('run' takes it from the scenario)")
    parser.add_argument("--scenario", required=True, help="scenario file (TOML subset)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed override")
    parser.add_argument("--threads", type=int, default=None,
                        help="thread hint (fallback: PARABOLICA_THREADS)")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("PARABOLICA_THREADS", "")
        threads = int(env) if env.isdigit() else None

    try:
        text = Path(args.scenario).read_text()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 1
    try:
        sc = parse_scenario(text)
        command = None if args.command == "run" else args.command
        return run_scenario(sc, command=command, out_dir=args.out, seed=args.seed,
                            threads=threads)
    except ParabolicaError as exc:
        print(f"error: {exc} [scenario {args.scenario}, command {args.command}]",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
