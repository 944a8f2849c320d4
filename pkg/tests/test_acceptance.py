"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the "acceptance criteria" section of the terminal summary.

The full Table 3 envelope (108 cells, about 4 hours on one core) is checked
live only when ``SGBIOT_FULL_TABLE3=1``. Otherwise the check reads the sweep
report committed under ``results/table3/report.csv``, which was produced by
``sgbiot sweep --table table3``.
"""
from __future__ import annotations

import csv
import os
import pathlib
import time

import numpy as np
import pytest
import scipy.sparse as sp

from sgbiot import cli
from sgbiot import config as cfgmod
from sgbiot.kl import eigenpairs_1d
from sgbiot.post import SgSolution, mean_field, sample_solution, variance_field
from sgbiot.solver import minres_solve
from sgbiot.system import VARIABLES, energy_norm

from conftest import (
    Tiny, dense_kronecker, norm_oracle_instance, record_criterion, weighted_norm_quadrature,
)
from test_stochastic import nystrom_eigenvalues

ROOT = pathlib.Path(__file__).resolve().parents[1]
TABLE3_REPORT = ROOT / "results" / "table3" / "report.csv"


def example1(**overrides):
    cfg = cfgmod.example1()
    return cfgmod.apply_overrides(cfg, [f"{k}={v}" for k, v in overrides.items()])


def iterations(cfg):
    result = cli.solve_config(cfg)
    assert result.report.converged
    return result.report.iterations


def test_criterion_01_table1_spot():
    t0 = time.perf_counter()
    expected = {(0.4, 5): 56, (0.4, 6): 56, (0.49999, 5): 71, (0.49999, 6): 71}
    got = {}
    for (nu, level), _ in expected.items():
        got[nu, level] = iterations(example1(**{"physics.nu": nu, "mesh.level": level}))
    seconds = time.perf_counter() - t0
    ok = all(abs(got[k] - v) <= 5 for k, v in expected.items()) and seconds < 30
    detail = ", ".join(f"nu={k[0]} l={k[1]}: {got[k]} (ref {v})" for k, v in expected.items())
    assert record_criterion(1, ok, f"Table 1 spot, +-5: {detail}; {seconds:.1f} s")


def test_criterion_02_table1_envelope():
    spec = cli.TABLES["table1"]
    base = cfgmod.preset(spec.preset)
    t0 = time.perf_counter()
    rows, errors = cli.sweep(base, [(k, list(v)) for k, v in spec.grid])
    seconds = time.perf_counter() - t0
    its = [r["iterations"] for r in rows if r["converged"] is True]
    ok = (not errors and len(rows) == 108 and len(its) == 108
          and max(its) <= 80 and min(its) >= 40 and seconds < 20 * 60)
    assert record_criterion(
        2, ok, f"Table 1 sweep: {len(its)}/108 converged, iterations min {min(its)} "
               f"max {max(its)} (bounds [40, 80]); {seconds / 60:.1f} min")


def test_criterion_03_table2_spot():
    cfg = example1(**{"stochastic.degree": 4, "conductivity.mean": 1e-10})
    n = iterations(cfg)
    assert record_criterion(3, abs(n - 72) <= 5, f"Table 2 p=4 kappa0=1e-10: {n} (ref 72 +-5)")


def _table3_rows():
    if os.environ.get("SGBIOT_FULL_TABLE3") == "1":
        spec = cli.TABLES["table3"]
        rows, _ = cli.sweep(cfgmod.preset(spec.preset), [(k, list(v)) for k, v in spec.grid])
        return rows, "live sweep"
    if not TABLE3_REPORT.exists():
        return None, "no recorded sweep"
    with open(TABLE3_REPORT, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["converged"] = r["converged"] == "True"
        r["iterations"] = int(r["iterations"]) if r["iterations"] else None
    return rows, f"recorded sweep {TABLE3_REPORT.relative_to(ROOT)}"


def test_criterion_04_table3():
    n = iterations(cfgmod.example2())
    spot_ok = abs(n - 79) <= 8
    rows, source = _table3_rows()
    if rows is None:
        record_criterion(4, spot_ok, f"Table 3 spot M=3 l=5: {n} (ref 79 +-8); "
                                     f"envelope NOT CHECKED ({source})",
                         status="INCOMPLETE" if spot_ok else "FAIL")
        assert spot_ok
        pytest.skip("Table 3 envelope needs SGBIOT_FULL_TABLE3=1 or a recorded sweep")
    its = [r["iterations"] for r in rows if r["converged"] is True]
    env_ok = len(rows) == 108 and len(its) == 108 and max(its) <= 110
    assert record_criterion(
        4, spot_ok and env_ok,
        f"Table 3 spot M=3 l=5: {n} (ref 79 +-8); envelope {len(its)}/108 converged, "
        f"max {max(its) if its else 'n/a'} (bound 110) from {source}")


def test_criterion_05_dense_oracle():
    t0 = time.perf_counter()
    t = Tiny(level=2, degree=1)
    assert t.young.M + t.cond.M == 2
    K = dense_kronecker(t.fem, t.G, t.params)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(K.shape[0])
        ref = K @ x
        worst = max(worst, np.linalg.norm(t.op.matvec(x) - ref) / np.linalg.norm(ref))
    xd = np.linalg.solve(K.toarray(), t.rhs)
    xm, _ = minres_solve(t.op, t.P, t.rhs, tol=1e-10)
    err = energy_norm(xm - xd, t.fem, t.params) / energy_norm(xd, t.fem, t.params)
    seconds = time.perf_counter() - t0
    ok = worst <= 1e-12 and err <= 1e-8 and seconds < 5
    assert record_criterion(5, ok, f"matvec vs assembled {worst:.1e} (<=1e-12), MINRES vs "
                                   f"direct {err:.1e} (<=1e-8); {seconds:.2f} s")


def test_criterion_06_norm_representation():
    t = norm_oracle_instance()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(5):
        x = rng.standard_normal(t.op.shape[0])
        ref = weighted_norm_quadrature(t, x)
        worst = max(worst, abs(x @ t.P.matvec(x) - ref) / ref)
    assert record_criterion(6, worst <= 1e-10,
                            f"x^T P x vs quadrature of the weighted norm: {worst:.1e} (<=1e-10)")


def test_criterion_07_kl():
    pairs = eigenpairs_1d(1.0, 2.0, 10)
    vals = np.array([p.value for p in pairs])
    ref = nystrom_eigenvalues(1.0, 2.0, n=2000)
    rel = np.max(np.abs(vals - ref) / ref)
    partial = np.cumsum([p.value for p in eigenpairs_1d(1.0, 2.0, 200)])
    trace_ok = bool(np.all(partial < 2.0) and partial[-1] > 0.995 * 2.0)
    assert record_criterion(7, rel <= 1e-6 and trace_ok,
                            f"KL vs 2000-point Nystrom {rel:.1e} (<=1e-6); partial sums "
                            f"increase to {partial[-1]:.5f} < interval length 2")


def test_criterion_08_variance_monte_carlo():
    t0 = time.perf_counter()
    t = Tiny(degree=3, e_amp=0.3, k_amp=0.3)
    x, _ = minres_solve(t.op, t.P, t.rhs, tol=1e-10)
    sol = SgSolution.from_vector(x, t.mesh, t.dofs, t.index_set, t.half_widths)
    rng = np.random.default_rng(2)
    a = np.asarray(sol.half_widths)
    samples = sample_solution(sol, rng.uniform(-a, a, size=(100_000, a.size)))
    worst = 0.0
    for name in ("u1", "u2", "pF", "pT", "p1", "p2"):
        var = variance_field(sol, name)
        mc = samples[name].var(axis=1)
        worst = max(worst, np.linalg.norm(mc - var) / np.linalg.norm(var))
    seconds = time.perf_counter() - t0
    assert record_criterion(8, worst <= 0.02 and seconds < 120,
                            f"variance vs 1e5-sample Monte Carlo: {worst:.2%} (<=2%); "
                            f"{seconds:.1f} s")


def _mirror_error(sol, name, sign):
    v = mean_field(sol, name)
    shape = sol.mesh.q2_shape if name in ("u1", "u2") else sol.mesh.q1_shape
    grid = v.reshape(shape[1], shape[0])
    return np.abs(grid - sign * grid[:, ::-1]).max() / np.abs(grid).max()


def test_criterion_09_footing():
    cfg = cfgmod.example3()
    res = cli.solve_config(cfg)
    errs = {n: _mirror_error(res.solution, n, s) for n, s in (("u1", -1), ("u2", 1), ("pF", 1))}
    res45 = cli.solve_config(cfgmod.apply_overrides(cfg, ["physics.nu=0.45"]))
    ok = res.report.converged and max(errs.values()) <= 1e-8 and res45.report.converged
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    assert record_criterion(
        9, ok, f"footing nu=0.4995 ({res.report.iterations} it) mirror errors {detail} "
               f"(<=1e-8); nu=0.45 converged={res45.report.converged} "
               f"({res45.report.iterations} it)")


def test_criterion_10_degenerate_limits():
    flat = {"young.relative_amplitudes": 0, "conductivity.relative_amplitudes": 0,
            "mesh.level": 4}
    sg = cli.solve_config(example1(**flat))
    det = cli.solve_config(example1(**flat, **{"stochastic.degree": 0}))
    mean_err, var_max = 0.0, 0.0
    for name in VARIABLES:
        m, d = mean_field(sg.solution, name), mean_field(det.solution, name)
        mean_err = max(mean_err, np.abs(m - d).max() / max(np.abs(d).max(), 1e-300))
        var_max = max(var_max, np.abs(variance_field(sg.solution, name)).max())

    # p = 0: the SG operator is the deterministic saddle-point matrix, column by column
    t = Tiny(degree=0)
    f, p = t.fem, t.params
    K0 = sp.bmat([
        [p.mu * f.A11[0], p.mu * f.A12[0], None, None, None, f.B1.T],
        [p.mu * f.A21[0], p.mu * f.A22[0], None, None, None, f.B2.T],
        [None, None, p.lam_inv * f.Ct[0], None, p.alpha * p.lam_inv * f.Cb.T, -p.lam_inv * f.C],
        [None, None, None, p.s0 * f.Ct[0], p.s0 * f.Cb.T, None],
        [None, None, p.alpha * p.lam_inv * f.Cb, p.s0 * f.Cb, -f.D[0], None],
        [f.B1, f.B2, -p.lam_inv * f.C, None, None, sp.csr_matrix((f.n_p, f.n_p))],
    ]).toarray()
    eye = np.eye(K0.shape[0])
    K = np.column_stack([t.op.matvec(e) for e in eye])
    exact = bool(np.array_equal(K, K0)) and t.n_y == 1
    x_sg, _ = minres_solve(t.op, t.P, t.rhs, tol=1e-12)
    x_det = np.linalg.solve(K0, t.rhs)
    det_err = np.abs(x_sg - x_det).max() / np.abs(x_det).max()

    ok = mean_err <= 1e-10 and var_max == 0.0 and exact and det_err <= 1e-8
    assert record_criterion(
        10, ok, f"zero modes: mean vs deterministic {mean_err:.1e} (<=1e-10), max variance "
                f"{var_max:.1e}; p=0 operator equals K0 exactly: {exact}, "
                f"solution vs direct {det_err:.1e}")
