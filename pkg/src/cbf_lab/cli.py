"""Command-line front end: ``cbf-lab <subcommand> [flags]``.

Machine-readable results go to stdout as JSON (numbers at 12 significant
digits); diagnostics go to stderr. Exit codes: 0 success, 1 usage or I/O error,
2 disagreement with a reference (``repro``, ``verify``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from cbf_lab.assumptions import check_assumptions
from cbf_lab.equilibria import (
    BOUNDARY_TOL,
    EQUILIBRIUM_TOL,
    find_equilibria,
    equilibrium_residual,
    make_report,
)
from cbf_lab.errors import CbfLabError
from cbf_lab.experiments import REGISTRY, compare
from cbf_lab.model import Kind, Scenario, load_scenario, spectral_norm
from cbf_lab.portrait import PortraitSpec, default_spec, render
from cbf_lab.reduction import FIXED, TRANSPORTED, reduce
from cbf_lab.safety_filter import indicator
from cbf_lab.simulate import (
    IntegratorConfig,
    basin_sample,
    integrate,
    trace_stable_manifold,
)
from cbf_lab.verify import run_suite

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2

log = logging.getLogger("cbf_lab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def canonical(obj):
    """Round floats to 12 significant digits; non-finite values become null."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(f"{x:.12g}")
        return 0.0 if x == 0 else x
    if isinstance(obj, Kind):
        return obj.value
    return obj


def emit(payload: dict) -> None:
    json.dump(canonical(payload), sys.stdout, indent=2, sort_keys=False)
    sys.stdout.write("\n")


def load_schema(name: str) -> dict:
    """The published JSON schema for a subcommand's stdout (or ``"scenario"``)."""
    res = resources.files("cbf_lab") / "schemas" / f"{name}.schema.json"
    return json.loads(res.read_text())


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x1,x2', got {text!r}") from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise argparse.ArgumentTypeError("coordinates must be finite")
    return a, b


def _scenario(args) -> Scenario:
    if getattr(args, "experiment", None):
        return REGISTRY[args.experiment].scenario(args.alpha0)
    if not args.scenario:
        raise UsageError("--scenario PATH (or --experiment NAME) is required")
    return load_scenario(args.scenario, alpha0=args.alpha0)


def _integrator(args) -> IntegratorConfig:
    base = IntegratorConfig()
    return IntegratorConfig(dt=args.dt or base.dt, t_max=args.tmax or base.t_max)


def _out_dir(args, required: bool = False) -> Path | None:
    if args.out is None:
        if required:
            raise UsageError("--out DIR is required")
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario_summary(sc: Scenario) -> dict:
    return {**sc.to_dict(), "closed_loop": sc.Atilde,
            "closed_loop_eigenvalues": [[z.real, z.imag] for z in sc.eigvals.tolist()]}


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    sc = _scenario(args)
    report = check_assumptions(sc, tol=args.tol or 0.0)
    emit({"scenario": _scenario_summary(sc), "all_hold": report.all_hold,
          "assumptions": report.to_dict()})
    return EXIT_OK


def cmd_equilibria(args) -> int:
    sc = _scenario(args)
    emit(find_equilibria(sc).to_dict())
    return EXIT_OK


def cmd_classify(args) -> int:
    sc = _scenario(args)
    p = np.array(args.point, dtype=float)
    scale = max(1.0, float(np.linalg.norm(sc.center)) ** 2)
    h = float(sc.obstacle.h(p))
    tol = args.tol or BOUNDARY_TOL
    if abs(h) > tol * scale:
        raise UsageError(f"point {args.point} is not on the obstacle boundary (h = {h:.6g})")
    report = make_report(sc, p, "UserPoint")
    delta = indicator(sc, p)
    residual = equilibrium_residual(sc, p, delta)
    emit({
        "point": p, "h": h, "indicator": delta, "equilibrium_residual": residual,
        "is_equilibrium": bool(residual <= EQUILIBRIUM_TOL * max(1.0, spectral_norm(sc.Atilde)) * scale
                               and delta < 0),
        "jacobian": report.jacobian,
        "eigenvalues": [[z.real, z.imag] for z in report.eigenvalues.tolist()],
        "kind": report.kind.value,
    })
    return EXIT_OK


def _trajectory_summary(traj) -> dict:
    return {"verdict": traj.verdict.value, "equilibrium_index": traj.equilibrium_index,
            "t_end": float(traj.t[-1]), "steps": len(traj.t) - 1, "final": traj.final,
            "min_h": float(np.min(traj.h))}


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    analysis = find_equilibria(sc)
    traj = integrate(sc, args.x0, _integrator(args), analysis.reports)
    out = _out_dir(args)
    csv_path = None
    if out is not None:
        csv_path = out / "trajectory.csv"
        csv_path.write_text(traj.to_csv())
    emit({"x0": list(args.x0), **_trajectory_summary(traj),
          "equilibria": [r.location for r in analysis.reports],
          "csv": str(csv_path) if csv_path else None})
    return EXIT_OK


def cmd_manifold(args) -> int:
    sc = _scenario(args)
    reports = find_equilibria(sc).reports
    out = _out_dir(args)
    cfg = _integrator(args)
    traces = []
    for i, rep in enumerate(reports):
        if rep.kind is not Kind.SADDLE:
            continue
        tr = trace_stable_manifold(sc, rep, config=cfg)
        files = []
        if out is not None:
            for b, branch in enumerate(tr.branches):
                path = out / f"manifold_{i}_branch{b}.csv"
                path.write_text(branch.to_csv())
                files.append(str(path))
        traces.append({
            "equilibrium_index": i, "location": rep.location,
            "stable_eigenvalue": tr.stable_eigval, "stable_eigvec": tr.stable_eigvec,
            "branches": [{"points": len(b.t), "t_end": float(b.t[-1]), "end": b.final}
                         for b in tr.branches],
            "csv": files,
        })
    emit({"manifolds": traces})
    return EXIT_OK


def cmd_basin(args) -> int:
    sc = _scenario(args)
    n = 1000 if args.n is None else args.n
    stats = basin_sample(sc, n, _integrator(args), seed=args.seed)
    emit({"seed": args.seed, **stats.to_dict(),
          "fractions": {"origin": stats.fraction("origin"),
                        "undetermined": stats.fraction("undetermined")}})
    return EXIT_OK


def _write_portrait(sc: Scenario, out: Path, grid: int, analysis) -> list[str]:
    base = default_spec(sc, grid=grid)
    spec = PortraitSpec(base.window, grid, base.trajectories, base.config)
    csv_text, svg = render(sc, spec, analysis.reports)
    files = {"field.csv": csv_text, "portrait.svg": svg,
             "equilibria.json": json.dumps(canonical(analysis.to_dict()), indent=2) + "\n"}
    for name, text in files.items():
        (out / name).write_text(text)
    return [str(out / name) for name in files]


def cmd_portrait(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args, required=True)
    analysis = find_equilibria(sc)
    files = _write_portrait(sc, out, args.grid, analysis)
    emit({"files": files, "grid": args.grid,
          "equilibria": [{"location": r.location, "kind": r.kind.value} for r in analysis.reports]})
    return EXIT_OK


def cmd_reduce(args) -> int:
    sc = _scenario(args)
    red = reduce(sc, args.convention)
    emit({"convention": red.convention, "E": red.E, "Einv": red.Einv,
          "scenario": red.scenario.to_dict()})
    return EXIT_OK


def cmd_verify(args) -> int:
    n = 100 if args.n is None else args.n
    report = run_suite(args.seed, n)
    emit(report.summary())
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_repro(args) -> int:
    exp = REGISTRY[args.name]
    sc = exp.scenario(args.alpha0)
    analysis = find_equilibria(sc)
    result = compare(exp, analysis.reports)
    row_ok = exp.table_row is None or analysis.diagnosis.table_row == exp.table_row
    out = _out_dir(args)
    if out is not None:
        files = _write_portrait(sc, out, args.grid, analysis)
    else:
        render(sc, default_spec(sc, grid=args.grid), analysis.reports)
        files = []
    match = result["match"] and row_ok
    emit({**result, "match": match, "table_row": analysis.diagnosis.table_row,
          "expected_table_row": exp.table_row,
          "equilibria": [{"location": r.location, "kind": r.kind.value,
                          "indicator": r.indicator} for r in analysis.reports],
          "files": files})
    return EXIT_OK if match else EXIT_MISMATCH


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
    common.add_argument("--experiment", choices=sorted(REGISTRY),
                        help="use a built-in experiment instead of --scenario")
    common.add_argument("--out", metavar="DIR", help="directory for CSV/SVG artifacts")
    common.add_argument("--alpha0", type=float, help="override the class-K slope")
    common.add_argument("--dt", type=float, help="RK4 step (default 1e-3)")
    common.add_argument("--tmax", type=float, help="integration horizon (default 100)")
    common.add_argument("--n", type=int, help="sample or corpus size")
    common.add_argument("--tol", type=float, help="tolerance for assumption and boundary tests")
    common.add_argument("-v", "--verbose", action="store_true")

    seeded = _Parser(add_help=False)
    seeded.add_argument("--seed", type=int, required=True, help="RNG seed (mandatory)")

    parser = _Parser(prog="cbf-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("check", parents=[common], help="check the standing assumptions"
                   ).set_defaults(func=cmd_check)
    sub.add_parser("equilibria", parents=[common], help="find and classify undesirable equilibria"
                   ).set_defaults(func=cmd_equilibria)
    p = sub.add_parser("classify", parents=[common], help="local analysis at a boundary point")
    p.add_argument("--point", type=_pair, required=True, metavar="X1,X2")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("simulate", parents=[common], help="integrate one trajectory")
    p.add_argument("--x0", type=_pair, required=True, metavar="X1,X2")
    p.set_defaults(func=cmd_simulate)
    sub.add_parser("manifold", parents=[common], help="trace stable manifolds of saddles"
                   ).set_defaults(func=cmd_manifold)
    sub.add_parser("basin", parents=[common, seeded], help="quasi-random basin statistics"
                   ).set_defaults(func=cmd_basin)
    p = sub.add_parser("portrait", parents=[common], help="write field.csv, portrait.svg, equilibria.json")
    p.add_argument("--grid", type=int, default=20, help="field samples per axis")
    p.set_defaults(func=cmd_portrait)
    p = sub.add_parser("reduce", parents=[common], help="reduce an ellipse scenario to a unit circle")
    p.add_argument("--convention", choices=[TRANSPORTED, FIXED], default=TRANSPORTED)
    p.set_defaults(func=cmd_reduce)
    sub.add_parser("verify", parents=[common, seeded], help="run the randomised oracle suite"
                   ).set_defaults(func=cmd_verify)
    p = sub.add_parser("repro", parents=[common], help="reproduce a built-in experiment")
    p.add_argument("name", choices=sorted(REGISTRY))
    p.add_argument("--grid", type=int, default=20, help="field samples per axis")
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cbf-lab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CbfLabError, OSError, ValueError) as exc:
        print(f"cbf-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
