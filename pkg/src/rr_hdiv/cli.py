"""Experiment driver: iteration-count tables, spectrum exports, one-off solves.

Four canned experiments cover the study grids (two Richardson tables, the
MINRES table, the spectrum sweep); `solve` runs a single configuration and
can emit its per-iteration history.  Tables are written as CSV with the
configuration embedded in a leading comment line, plus a JSON mirror that
round-trips through `read_records`.  Exit status is 0 only if every run
in the invocation converged.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, _kernels, boundary_system, iteration, spectrum, verify
from .mesh import build_unit_square_mesh, dump_mesh_csv

__all__ = [
    "ExperimentConfig",
    "table1_rows",
    "table2_rows",
    "table3_rows",
    "spectrum_runs",
    "run_table1",
    "run_table2",
    "run_table3",
    "run_spectrum",
    "write_table",
    "read_table",
    "read_records",
    "parse_count",
    "main",
]

TABLE1_HEADER = (
    "N",
    "gamma=h,theta=1/2",
    "gamma=h,theta=2/3",
    "gamma=H,theta=1/2",
    "gamma=H,theta=2/3",
    "L2-err",
    "Hdiv-err",
)
TABLE2_HEADER = (
    "H/h",
    "gamma=h,theta=1/2",
    "gamma=h,theta=2/3",
    "gamma=H,theta=1/2",
    "gamma=H,theta=2/3",
)
TABLE3_HEADER = (
    "N",
    "gamma=h,H/h=8",
    "gamma=h,H/h=16",
    "gamma=H,H/h=8",
    "gamma=H,H/h=16",
)

TABLE1_N_DESK = (4, 8, 16)
TABLE1_N_FULL = (4, 8, 16, 24, 32, 40, 48, 64)
TABLE2_RATIOS = (4, 8, 16, 32)
TABLE3_N_DESK = (4, 8, 16)
TABLE3_N_FULL = (4, 8, 16, 24, 32, 40, 48)
SPECTRUM_GRID = tuple((N, r) for N in (4, 8, 12) for r in (4, 8))

RICHARDSON_COLUMNS = (("h", 0.5), ("h", 2.0 / 3.0), ("H", 0.5), ("H", 2.0 / 3.0))
MINRES_COLUMNS = (("h", 8), ("h", 16), ("H", 8), ("H", 16))


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and output settings of one canned experiment."""

    experiment: str
    n_list: tuple = ()
    ratio_list: tuple = ()
    gamma_rules: tuple = ("h", "H")
    theta_list: tuple = (0.5, 2.0 / 3.0)
    tol: float = 1e-6
    max_iter: int = 10000
    out_dir: str = "."
    fmt: str = "csv"

    def __post_init__(self):
        if self.experiment not in {"table1", "table2", "table3", "spectrum", "single"}:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.fmt not in {"csv", "json"}:
            raise ValueError(f"unknown format {self.fmt!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("n_list", "ratio_list", "gamma_rules", "theta_list"):
            d[key] = list(d[key])
        return d


def _count_cell(report) -> str:
    n = report.iterations
    return str(n) if report.converged else f"{n}*"


def parse_count(cell: str):
    """Iteration-count cell -> (count, converged)."""
    cell = cell.strip()
    if cell.endswith("*"):
        return int(cell[:-1]), False
    return int(cell), True


def table1_rows(n_list=TABLE1_N_DESK, tol=1e-6, max_iter=10000):
    """Fixed ratio 8: four Richardson counts plus errors per N."""
    case = verify.manufactured_case()
    rows = []
    for N in n_list:
        cells = {}
        errs = (float("nan"), float("nan"))
        for rule, theta in RICHARDSON_COLUMNS:
            cfg = iteration.IterationConfig(
                N=N, ratio=8, gamma_rule=rule, theta=theta,
                tol=tol, max_iter=max_iter,
            )
            rep = iteration.run_richardson(cfg, case)
            cells[(rule, theta)] = rep
            if rule == "h" and theta == 0.5:
                errs = (rep.l2_error, rep.hdiv_error)
        rows.append({"N": N, "cells": cells, "errors": errs})
    return rows


def table2_rows(ratio_list=TABLE2_RATIOS, tol=1e-6, max_iter=10000):
    """Fixed 4x4 subdomains: four Richardson counts per ratio."""
    case = verify.manufactured_case()
    rows = []
    for ratio in ratio_list:
        cells = {}
        for rule, theta in RICHARDSON_COLUMNS:
            cfg = iteration.IterationConfig(
                N=4, ratio=ratio, gamma_rule=rule, theta=theta,
                tol=tol, max_iter=max_iter,
            )
            cells[(rule, theta)] = iteration.run_richardson(cfg, case)
        rows.append({"ratio": ratio, "cells": cells})
    return rows


def table3_rows(n_list=TABLE3_N_DESK, tol=1e-6, max_iter=10000):
    """MINRES counts per N over (gamma rule, ratio) columns."""
    case = verify.manufactured_case()
    rows = []
    for N in n_list:
        cells = {}
        for rule, ratio in MINRES_COLUMNS:
            cfg = iteration.IterationConfig(N=N, ratio=ratio, gamma_rule=rule)
            problem = iteration.build_problem(cfg, case.load)
            op = boundary_system.InterfaceOperator(problem)
            cells[(rule, ratio)] = boundary_system.solve_minres(
                op, op.load(), tol=tol, max_iter=max_iter, case=case
            )
        rows.append({"N": N, "cells": cells})
    return rows


def spectrum_runs(grid=SPECTRUM_GRID, gamma_rule="h", theta=1.0):
    """Spectrum reports over the (N, ratio) grid; oversize entries skipped."""
    reports = []
    skipped = []
    for N, r in grid:
        cfg = iteration.IterationConfig(
            N=N, ratio=r, gamma_rule=gamma_rule, theta=theta
        )
        try:
            op = spectrum.assemble_Q(cfg)
        except ValueError as err:
            skipped.append((N, r, str(err)))
            continue
        reports.append(spectrum.eigenvalues(op))
    return reports, skipped


def write_table(path, header, rows, config: ExperimentConfig) -> None:
    """CSV with a `# config:` comment line; deterministic bytes."""
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.as_dict(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_table(path):
    """Inverse of write_table -> (config dict, header, row dicts)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# config: "):
        raise ValueError(f"{path}: missing config comment line")
    config = json.loads(lines[0][len("# config: "):])
    reader = csv.reader(lines[1:])
    header = next(reader)
    rows = [dict(zip(header, row)) for row in reader]
    return config, header, rows


def _record(config: ExperimentConfig, rows) -> dict:
    return {
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": config.as_dict(),
        "rows": rows,
    }


def _write_record(path, record) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_records(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(config: ExperimentConfig, name, header, csv_rows, json_rows):
    os.makedirs(config.out_dir, exist_ok=True)
    paths = []
    if config.fmt == "csv":
        csv_path = os.path.join(config.out_dir, f"{name}.csv")
        write_table(csv_path, header, csv_rows, config)
        paths.append(csv_path)
    json_path = os.path.join(config.out_dir, f"{name}.json")
    _write_record(json_path, _record(config, json_rows))
    paths.append(json_path)
    return paths


def _report_json(rep: iteration.SolveReport) -> dict:
    return {
        "iterations": rep.iterations,
        "converged": bool(rep.converged),
        "l2_error": rep.l2_error,
        "hdiv_error": rep.hdiv_error,
        "wall_time": rep.wall_time,
    }


def run_table1(config: ExperimentConfig):
    rows = table1_rows(config.n_list, config.tol, config.max_iter)
    csv_rows, json_rows, ok = [], [], True
    for row in rows:
        cells = [row["cells"][key] for key in RICHARDSON_COLUMNS]
        ok &= all(c.converged for c in cells)
        csv_rows.append(
            [row["N"]] + [_count_cell(c) for c in cells]
            + [f"{row['errors'][0]:.3e}", f"{row['errors'][1]:.3e}"]
        )
        json_rows.append({
            "N": row["N"],
            "counts": {f"{r},{t:g}": _report_json(c)
                       for (r, t), c in row["cells"].items()},
            "l2_error": row["errors"][0],
            "hdiv_error": row["errors"][1],
        })
    paths = _emit(config, "table1", TABLE1_HEADER, csv_rows, json_rows)
    return rows, paths, ok


def run_table2(config: ExperimentConfig):
    rows = table2_rows(config.ratio_list, config.tol, config.max_iter)
    csv_rows, json_rows, ok = [], [], True
    for row in rows:
        cells = [row["cells"][key] for key in RICHARDSON_COLUMNS]
        ok &= all(c.converged for c in cells)
        csv_rows.append([row["ratio"]] + [_count_cell(c) for c in cells])
        json_rows.append({
            "ratio": row["ratio"],
            "counts": {f"{r},{t:g}": _report_json(c)
                       for (r, t), c in row["cells"].items()},
        })
    paths = _emit(config, "table2", TABLE2_HEADER, csv_rows, json_rows)
    return rows, paths, ok


def run_table3(config: ExperimentConfig):
    rows = table3_rows(config.n_list, config.tol, config.max_iter)
    csv_rows, json_rows, ok = [], [], True
    for row in rows:
        cells = [row["cells"][key] for key in MINRES_COLUMNS]
        ok &= all(c.converged for c in cells)
        csv_rows.append([row["N"]] + [_count_cell(c) for c in cells])
        json_rows.append({
            "N": row["N"],
            "counts": {
                f"{rule},r={ratio}": {
                    "iterations": c.iterations,
                    "converged": bool(c.converged),
                    "breakdown": bool(c.breakdown),
                    "final_residual": c.final_residual,
                    "l2_error": c.l2_error,
                    "hdiv_error": c.hdiv_error,
                }
                for (rule, ratio), c in row["cells"].items()
            },
        })
    paths = _emit(config, "table3", TABLE3_HEADER, csv_rows, json_rows)
    return rows, paths, ok


SPECTRUM_HEADER = (
    "N", "r", "gamma", "theta", "dim",
    "max_real_below_unit", "unit_count", "max_nonreal_modulus", "file",
)


def run_spectrum(config: ExperimentConfig):
    grid = tuple(
        (N, r)
        for N in (config.n_list or (4, 8, 12))
        for r in (config.ratio_list or (4, 8))
    )
    reports, skipped = spectrum_runs(grid, gamma_rule=config.gamma_rules[0],
                                     theta=config.theta_list[0])
    os.makedirs(config.out_dir, exist_ok=True)
    csv_rows, json_rows = [], []
    paths = []
    for rep in reports:
        fname = spectrum.spectrum_filename(rep)
        fpath = os.path.join(config.out_dir, fname)
        spectrum.export_spectrum(rep, fpath)
        paths.append(fpath)
        csv_rows.append([
            rep.N, rep.ratio, rep.gamma_rule, f"{rep.theta:g}", rep.dim,
            f"{rep.max_real_below_unit():.12e}", rep.unit_count,
            f"{rep.max_nonreal_modulus:.12e}", fname,
        ])
        json_rows.append({
            "N": rep.N, "r": rep.ratio, "gamma": rep.gamma_rule,
            "theta": rep.theta, "dim": rep.dim,
            "max_real_below_unit": rep.max_real_below_unit(),
            "unit_count": rep.unit_count,
            "max_nonreal_modulus": rep.max_nonreal_modulus,
            "file": fname,
        })
    for N, r, why in skipped:
        print(f"spectrum N={N} r={r}: skipped ({why})", file=sys.stderr)
    paths += _emit(config, "spectrum_summary", SPECTRUM_HEADER, csv_rows, json_rows)
    return reports, paths, True


def _write_history(path, name, values, config_echo) -> None:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
    buf.write(f"iteration,{name}\n")
    for k, v in enumerate(values, start=1):
        buf.write(f"{k},{v:.16e}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _cmd_run(args) -> int:
    if args.experiment == "table1":
        n_full = [n for n in TABLE1_N_FULL if n <= args.max_n]
        n_desk = [n for n in TABLE1_N_DESK if n <= args.max_n]
        config = ExperimentConfig(
            experiment="table1",
            n_list=tuple(n_full if args.full else n_desk),
            ratio_list=(8,), tol=args.tol, max_iter=args.max_iter,
            out_dir=args.out, fmt=args.format,
        )
        if args.full:
            print("full grid requested: the largest rows factorize "
                  "thousands of subdomain blocks and can take many minutes",
                  file=sys.stderr)
        _, paths, ok = run_table1(config)
    elif args.experiment == "table2":
        config = ExperimentConfig(
            experiment="table2", n_list=(4,), ratio_list=TABLE2_RATIOS,
            tol=args.tol, max_iter=args.max_iter,
            out_dir=args.out, fmt=args.format,
        )
        _, paths, ok = run_table2(config)
    elif args.experiment == "table3":
        base = TABLE3_N_FULL if args.full else TABLE3_N_DESK
        config = ExperimentConfig(
            experiment="table3", n_list=tuple(n for n in base if n <= args.max_n),
            ratio_list=(8, 16), tol=args.tol, max_iter=args.max_iter,
            out_dir=args.out, fmt=args.format,
        )
        if args.full:
            print("full grid requested: expect minutes per large row",
                  file=sys.stderr)
        _, paths, ok = run_table3(config)
    else:
        config = ExperimentConfig(
            experiment="spectrum", n_list=(4, 8, 12), ratio_list=(4, 8),
            gamma_rules=(args.gamma,), theta_list=(1.0,),
            out_dir=args.out, fmt=args.format,
        )
        _, paths, ok = run_spectrum(config)
    for p in paths:
        print(p)
    if not ok:
        print("warning: at least one run did not converge", file=sys.stderr)
    return 0 if ok else 1


def _cmd_solve(args) -> int:
    case = verify.manufactured_case()
    cfg = iteration.IterationConfig(
        N=args.n, ratio=args.ratio, beta=args.beta, gamma_rule=args.gamma,
        theta=args.theta, tol=args.tol, max_iter=args.max_iter,
        constrained=args.method != "baseline",
    )
    echo = {
        "N": args.n, "ratio": args.ratio, "gamma": args.gamma,
        "theta": args.theta, "tol": args.tol, "max_iter": args.max_iter,
        "method": args.method, "beta": args.beta,
    }
    if args.dump_mesh:
        os.makedirs(args.dump_mesh, exist_ok=True)
        dump_mesh_csv(build_unit_square_mesh(cfg.m), args.dump_mesh)
        print(f"mesh tables written to {args.dump_mesh}")
    if args.method == "richardson":
        rep = iteration.run_richardson(cfg, case)
    elif args.method == "baseline":
        rep = iteration.run_baseline(cfg, case)
    else:
        problem = iteration.build_problem(cfg, case.load)
        op = boundary_system.InterfaceOperator(problem)
        krep = boundary_system.solve_minres(
            op, op.load(), tol=args.tol, max_iter=args.max_iter, case=case
        )
        print(
            f"minres N={args.n} r={args.ratio} gamma={args.gamma}: "
            f"{krep.iterations} iterations, converged={krep.converged}, "
            f"final residual {krep.final_residual:.3e}, "
            f"L2 {krep.l2_error:.3e}, Hdiv {krep.hdiv_error:.3e} "
            f"[kernels: {_kernels.BACKEND}]"
        )
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _write_history(
                os.path.join(args.out, "residual_history.csv"),
                "relative_residual", krep.residual_history, echo,
            )
            _write_record(os.path.join(args.out, "solve.json"), _record(
                ExperimentConfig(experiment="single", out_dir=args.out),
                [{
                    "method": "minres", **echo,
                    "iterations": krep.iterations,
                    "converged": bool(krep.converged),
                    "breakdown": bool(krep.breakdown),
                    "final_residual": krep.final_residual,
                    "l2_error": krep.l2_error, "hdiv_error": krep.hdiv_error,
                }],
            ))
        return 0 if krep.converged else 1
    print(
        f"{args.method} N={args.n} r={args.ratio} gamma={args.gamma} "
        f"theta={args.theta:g}: {rep.iterations} iterations, "
        f"converged={rep.converged}, L2 {rep.l2_error:.3e}, "
        f"Hdiv {rep.hdiv_error:.3e}, {rep.wall_time:.2f}s "
        f"[kernels: {_kernels.BACKEND}]"
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_history(
            os.path.join(args.out, "increment_history.csv"),
            "sup_increment", rep.increment_history, echo,
        )
        _write_record(os.path.join(args.out, "solve.json"), _record(
            ExperimentConfig(experiment="single", out_dir=args.out),
            [{"method": args.method, **echo, **_report_json(rep)}],
        ))
    return 0 if rep.converged else 1


def _cmd_spectrum(args) -> int:
    cfg = iteration.IterationConfig(
        N=args.n, ratio=args.ratio, gamma_rule=args.gamma, theta=args.theta
    )
    try:
        op = spectrum.assemble_Q(cfg)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    rep = spectrum.eigenvalues(op)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, spectrum.spectrum_filename(rep))
    spectrum.export_spectrum(rep, path)
    print(
        f"dim {rep.dim}: unit eigenvalues {rep.unit_count}, "
        f"max real below unit {rep.max_real_below_unit():.6f}, "
        f"max non-real modulus {rep.max_nonreal_modulus:.6f}"
    )
    print(path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rr-hdiv",
        description="Two-sided Robin-Robin decomposition solver "
                    "for the grad-div model problem",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a canned experiment grid")
    p_run.add_argument("--experiment", required=True,
                       choices=["table1", "table2", "table3", "spectrum"])
    p_run.add_argument("--max-n", type=int, default=16)
    p_run.add_argument("--full", action="store_true",
                       help="full study grid instead of the desk-scale default")
    p_run.add_argument("--out", default="results")
    p_run.add_argument("--format", choices=["csv", "json"], default="csv")
    p_run.add_argument("--gamma", default="h", help="spectrum grid Robin rule")
    p_run.add_argument("--tol", type=float, default=1e-6)
    p_run.add_argument("--max-iter", type=int, default=10000)
    p_run.set_defaults(func=_cmd_run)

    p_solve = sub.add_parser("solve", help="run one configuration")
    p_solve.add_argument("--n", type=int, required=True)
    p_solve.add_argument("--ratio", type=int, required=True)
    p_solve.add_argument("--gamma", default="h",
                         help='"h", "H", or a positive number')
    p_solve.add_argument("--theta", type=float, default=0.5)
    p_solve.add_argument("--beta", type=float, default=1.0)
    p_solve.add_argument("--tol", type=float, default=1e-6)
    p_solve.add_argument("--max-iter", type=int, default=10000)
    p_solve.add_argument("--method", default="richardson",
                         choices=["richardson", "minres", "baseline"])
    p_solve.add_argument("--out", default=None,
                         help="directory for history CSV and run record")
    p_solve.add_argument("--dump-mesh", default=None,
                         help="directory for mesh debug tables")
    p_solve.set_defaults(func=_cmd_solve)

    p_spec = sub.add_parser("spectrum", help="export one spectrum")
    p_spec.add_argument("--n", type=int, required=True)
    p_spec.add_argument("--ratio", type=int, required=True)
    p_spec.add_argument("--gamma", default="h")
    p_spec.add_argument("--theta", type=float, default=1.0)
    p_spec.add_argument("--out", default="results")
    p_spec.set_defaults(func=_cmd_spectrum)

    args = parser.parse_args(argv)
    gamma = getattr(args, "gamma", None)
    if gamma is not None and gamma not in ("h", "H"):
        try:
            val = float(gamma)
        except ValueError:
            parser.error(f'--gamma must be "h", "H", or a number, got {gamma!r}')
        if val <= 0:
            parser.error("--gamma must be positive")
        args.gamma = val
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
