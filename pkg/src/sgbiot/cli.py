"""Command-line driver: single runs, parameter sweeps and the built-in tables.

Examples::

    sgbiot run --preset example1 --set physics.nu=0.49999
    sgbiot run --preset example3 --out results/footing
    sgbiot sweep --table table1 --out results/table1
    sgbiot sweep --preset example1 --grid physics.nu=0.4,0.499 --grid mesh.level=5,6
    sgbiot show-config --preset example2
"""
from __future__ import annotations

import argparse
import csv
import itertools
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import config as cfgmod
from .assembly import assemble_fem_blocks
from .mesh import build_mesh, classify_dofs
from .post import SgSolution, export_fields, mean_field, variance_field
from .precond import build_preconditioner
from .solver import SolveReport, minres_solve
from .stochastic import g_matrices, total_degree_set
from .system import build_operator, build_rhs

log = logging.getLogger("sgbiot")

REPORT_COLUMNS = ["nu", "alpha", "kappa0", "e0", "level", "degree", "ny", "nx",
                  "iterations", "converged", "seconds", "M1", "M2"]


@dataclass
class RunResult:
    config: cfgmod.RunConfig
    report: SolveReport
    solution: SgSolution
    files: list = field(default_factory=list)
    setup_seconds: float = 0.0

    def row(self) -> dict:
        cfg, rep = self.config, self.report
        return {
            "nu": cfg.nu, "alpha": cfg.alpha, "kappa0": cfg.conductivity.mean,
            "e0": cfg.young.mean, "level": cfg.level, "degree": cfg.degree,
            "ny": self.solution.layout.n_y, "nx": self.solution.layout.n_x,
            "iterations": rep.iterations, "converged": rep.converged,
            "seconds": round(rep.seconds, 3),
            "M1": cfg.young.M, "M2": cfg.conductivity.M,
        }


def solve_config(cfg: cfgmod.RunConfig) -> RunResult:
    """Assemble, precondition and solve one configuration (no file output)."""
    cfg.validate()
    t0 = time.perf_counter()
    dom = cfg.rect()
    mesh = build_mesh(dom, cfg.level)
    dofs = classify_dofs(mesh, cfg.boundary())
    cfgmod.check_positivity(cfg, mesh)
    young = cfg.young.expansion(dom)
    cond = cfg.conductivity.expansion(dom)
    fem = assemble_fem_blocks(mesh, dofs, young, cond, cfg.body_force, cfg.source,
                              cfg.boundary().traction)
    index_set = total_degree_set(young.M + cond.M, cfg.degree)
    half_widths = young.half_widths + cond.half_widths
    G = g_matrices(index_set, half_widths)
    params = cfg.physics()
    op = build_operator(fem, G, params)
    P = build_preconditioner(fem, params, index_set.n_y)
    rhs = build_rhs(fem, index_set.n_y)
    setup = time.perf_counter() - t0
    x, report = minres_solve(op, P, rhs, cfg.tol, cfg.maxit, parameters=cfg.parameter_echo())
    sol = SgSolution.from_vector(x, mesh, dofs, index_set, half_widths)
    log.info("%s: %d iterations (converged=%s) in %.2fs, setup %.2fs",
             cfg.name, report.iterations, report.converged, report.seconds, setup)
    return RunResult(cfg, report, sol, setup_seconds=setup)


def run(cfg: cfgmod.RunConfig) -> RunResult:
    """Solve and write the report row plus requested mean/variance fields."""
    result = solve_config(cfg)
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        report_path = os.path.join(cfg.out_dir, "report.csv")
        write_report(report_path, [result.row()])
        result.files.append(report_path)
        fields = {}
        for name in cfg.out_fields:
            fields[f"{name}_mean"] = mean_field(result.solution, name)
            fields[f"{name}_variance"] = variance_field(result.solution, name)
        if fields:
            result.files += export_fields(fields, result.solution.mesh, cfg.out_format,
                                          cfg.out_dir)
    return result


def write_report(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class TableSpec:
    preset: str
    fixed: tuple
    grid: tuple          # ((key, values), ...) in nesting order
    row_keys: tuple      # report columns forming the pivot rows
    col_keys: tuple      # report columns forming the pivot columns


TABLES = {
    "table1": TableSpec(
        "example1", (),
        (("conductivity.mean", ("1", "1e-5", "1e-10")),
         ("physics.alpha", ("1", "1e-2", "1e-4")),
         ("mesh.level", ("5", "6")),
         ("young.mean", ("1e5", "1")),
         ("physics.nu", ("0.4", "0.499", "0.49999"))),
        ("kappa0", "alpha", "level"), ("e0", "nu"),
    ),
    "table2": TableSpec(
        "example1", ("stochastic.degree=4", "conductivity.mean=1e-10"),
        (("physics.alpha", ("1", "1e-2", "1e-4")),
         ("mesh.level", ("5", "6")),
         ("young.mean", ("1e5", "1")),
         ("physics.nu", ("0.4", "0.499", "0.49999"))),
        ("kappa0", "alpha", "level"), ("e0", "nu"),
    ),
    "table3": TableSpec(
        "example2", (),
        (("conductivity.mean", ("1", "1e-5", "1e-10")),
         ("physics.alpha", ("1", "1e-2", "1e-4")),
         ("mesh.level", ("5", "6")),
         ("young.modes+conductivity.modes", ("3", "5")),
         ("physics.nu", ("0.4", "0.499", "0.49999"))),
        ("kappa0", "alpha", "level"), ("M1", "nu"),
    ),
}


def parse_grid(items) -> list:
    """``["a.b=1,2", "c.d+e.f=3,4"]`` -> ``[("a.b", ["1","2"]), ("c.d+e.f", ["3","4"])]``."""
    grid = []
    for item in items or ():
        if "=" not in item:
            raise cfgmod.ConfigError(f"grid entry {item!r} must look like key=v1,v2")
        key, values = item.split("=", 1)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise cfgmod.ConfigError(f"grid entry {item!r} has no values")
        grid.append((key.strip(), vals))
    return grid


def grid_cells(grid) -> list:
    """Cartesian product of the grid as lists of ``key=value`` overrides."""
    keys = [k for k, _ in grid]
    cells = []
    for combo in itertools.product(*[v for _, v in grid]):
        overrides = []
        for key, value in zip(keys, combo):
            overrides += [f"{k}={value}" for k in key.split("+")]
        cells.append(overrides)
    return cells or [[]]


def _run_cell(base, overrides):
    try:
        cfg = cfgmod.apply_overrides(base, overrides)
        return solve_config(cfg).row(), None
    except Exception as exc:  # recorded in the table, sweep continues
        return _failed_row(base, overrides), f"{type(exc).__name__}: {exc}"


def _failed_row(base, overrides) -> dict:
    row = {c: "" for c in REPORT_COLUMNS}
    echo = {"physics.nu": "nu", "physics.alpha": "alpha", "conductivity.mean": "kappa0",
            "young.mean": "e0", "mesh.level": "level", "stochastic.degree": "degree"}
    row.update(nu=base.nu, alpha=base.alpha, kappa0=base.conductivity.mean,
               e0=base.young.mean, level=base.level, degree=base.degree)
    for item in overrides:
        key, value = item.split("=", 1)
        if key in echo:
            row[echo[key]] = value
    row["converged"] = "failed"
    return row


def sweep(base: cfgmod.RunConfig, grid, jobs: int = 1, progress=None) -> tuple:
    """Run every grid cell; returns ``(rows, errors)`` in grid order."""
    cells = grid_cells(grid)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, [base] * len(cells), cells))
    else:
        results = []
        for i, cell in enumerate(cells):
            results.append(_run_cell(base, cell))
            if progress:
                progress(i + 1, len(cells), results[-1])
    rows = [r for r, _ in results]
    errors = [(cells[i], e) for i, (_, e) in enumerate(results) if e]
    return rows, errors


def pivot(rows, row_keys, col_keys) -> list:
    """Published-table layout: one line per ``row_keys`` combination, iteration counts across."""
    def key(row, names):
        return tuple(str(row[n]) for n in names)

    row_order, col_order, cells = [], [], {}
    for row in rows:
        rk, ck = key(row, row_keys), key(row, col_keys)
        if rk not in row_order:
            row_order.append(rk)
        if ck not in col_order:
            col_order.append(ck)
        cells[rk, ck] = row["iterations"] if row["converged"] is True else row["converged"]
    header = list(row_keys) + [
        " ".join(f"{n}={v}" for n, v in zip(col_keys, ck)) for ck in col_order
    ]
    table = [header]
    for rk in row_order:
        table.append(list(rk) + [cells.get((rk, ck), "") for ck in col_order])
    return table


# --- argument handling ---------------------------------------------------------

def _base_config(args) -> cfgmod.RunConfig:
    if args.config:
        cfg = cfgmod.load(args.config)
    elif args.preset:
        cfg = cfgmod.preset(args.preset)
    else:
        cfg = cfgmod.preset("example1")
    overrides = list(args.set or [])
    if args.level is not None:
        overrides.append(f"mesh.level={args.level}")
    if args.degree is not None:
        overrides.append(f"stochastic.degree={args.degree}")
    if args.tol is not None:
        overrides.append(f"solver.tol={args.tol}")
    if getattr(args, "out", None) and args.command == "run":
        overrides.append(f"output.dir={args.out}")
    return cfgmod.apply_overrides(cfg, overrides)


def _common(p):
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a configuration value (repeatable)")
    p.add_argument("--level", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgbiot", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one configuration")
    _common(p)
    p.add_argument("--out", help="output directory for report.csv and field files")

    p = sub.add_parser("sweep", help="solve a grid of configurations")
    _common(p)
    p.add_argument("--table", choices=sorted(TABLES), help="built-in table grid")
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help="grid axis; tie keys with '+' (repeatable)")
    p.add_argument("--out", default="sweep", help="output directory")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("show-config", help="print the resolved configuration")
    _common(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep" and args.table:
            spec = TABLES[args.table]
            if not (args.preset or args.config):
                args.preset = spec.preset
        base = _base_config(args)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "show-config":
        sys.stdout.write(cfgmod.dumps(base))
        return 0

    if args.command == "run":
        try:
            result = run(base)
        except Exception as exc:
            print(f"error: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        row = result.row()
        print(",".join(REPORT_COLUMNS))
        print(",".join(str(row[c]) for c in REPORT_COLUMNS))
        for path in result.files:
            print(f"wrote {path}")
        return 0 if result.report.converged else 1

    # sweep
    if args.table:
        spec = TABLES[args.table]
        base = cfgmod.apply_overrides(base, spec.fixed)
        grid = [(k, list(v)) for k, v in spec.grid] + parse_grid(args.grid)
        row_keys, col_keys = spec.row_keys, spec.col_keys
    else:
        grid = parse_grid(args.grid)
        row_keys = col_keys = None

    def progress(i, n, result):
        row, err = result
        status = f"{row['iterations']} it" if err is None else f"failed ({err})"
        echo = " ".join(f"{k}={row[k]}" for k in ("nu", "alpha", "kappa0", "e0", "level",
                                                  "degree", "M1", "M2"))
        print(f"[{i}/{n}] {echo}: {status} ({row['seconds']} s)", file=sys.stderr, flush=True)

    rows, errors = sweep(base, grid, args.jobs, progress if args.verbose else None)
    os.makedirs(args.out, exist_ok=True)
    write_report(os.path.join(args.out, "report.csv"), rows)
    if row_keys:
        with open(os.path.join(args.out, "table.csv"), "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(pivot(rows, row_keys, col_keys))
    its = [r["iterations"] for r in rows if r["converged"] is True]
    if its:
        print(f"{len(rows)} cells, iterations min {min(its)} max {max(its)}")
    for cell, err in errors:
        print(f"failed cell {' '.join(cell)}: {err}", file=sys.stderr)
    ok = not errors and all(r["converged"] is True for r in rows)
    return 0 if ok else 1


def summarize(rows) -> dict:
    its = np.array([r["iterations"] for r in rows if r["converged"] is True])
    return {"cells": len(rows), "min": int(its.min()), "max": int(its.max())} if its.size else {}


if __name__ == "__main__":
    sys.exit(main())
