"""Preconditioned MINRES with the relative preconditioned-residual stopping test."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class SolverBreakdown(RuntimeError):
    """Lanczos breakdown, a non-positive-definite preconditioner, or NaNs."""


@dataclass
class SolveReport:
    iterations: int
    residuals: list = field(repr=False)
    seconds: float
    converged: bool
    true_residual: float = float("nan")
    parameters: dict = field(default_factory=dict)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def minres_solve(op, precond, rhs, tol: float = 1e-6, maxit: int = 500,
                 parameters: dict | None = None):
    """Solve ``K x = rhs`` for symmetric ``K`` and SPD preconditioner ``P``.

    ``op`` and ``precond`` may be objects with ``matvec``/``solve`` methods or
    plain callables. The iteration starts from zero and stops once
    ``||r_k||_{P^-1} / ||rhs||_{P^-1} <= tol``, where the preconditioned residual
    norm is the Lanczos quantity carried by the recurrence.

    Returns ``(x, SolveReport)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    apply_K = getattr(op, "matvec", op)
    apply_Pinv = getattr(precond, "solve", precond)
    b = np.asarray(rhs, dtype=float)
    n = b.size
    t0 = time.perf_counter()

    x = np.zeros(n)
    v_prev = np.zeros(n)
    v = b.copy()
    z = apply_Pinv(v)
    gamma = _lanczos_norm(v, z)
    history = [1.0]
    if gamma == 0.0:
        report = SolveReport(0, [0.0], time.perf_counter() - t0, True, 0.0,
                             dict(parameters or {}))
        return x, report
    gamma1 = gamma
    gamma_prev = 1.0
    eta = gamma
    c, c_prev = 1.0, 1.0
    s, s_prev = 0.0, 0.0
    w = np.zeros(n)
    w_prev = np.zeros(n)
    converged = False
    it = 0
    while it < maxit:
        it += 1
        z = z / gamma
        Az = apply_K(z)
        delta = float(Az @ z)
        v_new = Az - (delta / gamma) * v - (gamma / gamma_prev) * v_prev
        z_new = apply_Pinv(v_new)
        gamma_new = _lanczos_norm(v_new, z_new)

        a0 = c * delta - c_prev * s * gamma
        a1 = math.hypot(a0, gamma_new)
        a2 = s * delta + c_prev * c * gamma
        a3 = s_prev * gamma
        if a1 == 0.0:
            raise SolverBreakdown(f"MINRES breakdown at iteration {it}")
        c_prev, s_prev = c, s
        c, s = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_prev - a2 * w) / a1
        x += (c * eta) * w_new
        eta = -s * eta

        rel = abs(eta) / gamma1
        if not math.isfinite(rel):
            raise SolverBreakdown(f"non-finite residual at iteration {it}")
        history.append(rel)
        log.debug("minres it=%d rel=%.3e", it, rel)
        if rel <= tol:
            converged = True
            break
        if gamma_new == 0.0:
            # invariant subspace found; x is exact up to rounding
            converged = True
            break
        w_prev, w = w, w_new
        v_prev, v = v, v_new
        gamma_prev, gamma = gamma, gamma_new
        z = z_new

    r = b - apply_K(x)
    true_rel = _lanczos_norm(r, apply_Pinv(r)) / gamma1
    report = SolveReport(
        iterations=it,
        residuals=history,
        seconds=time.perf_counter() - t0,
        converged=converged,
        true_residual=true_rel,
        parameters=dict(parameters or {}),
    )
    if converged and true_rel > 10 * tol:
        log.warning("recurrence residual %.2e but true residual %.2e", history[-1], true_rel)
    return x, report


def _lanczos_norm(v, z) -> float:
    val = float(v @ z)
    if not math.isfinite(val):
        raise SolverBreakdown("non-finite value in preconditioned residual")
    if val < 0:
        scale = float(np.linalg.norm(v) * np.linalg.norm(z))
        if val < -1e-12 * scale:
            raise SolverBreakdown("preconditioner is not positive definite (v^T P^-1 v < 0)")
        val = 0.0
    return math.sqrt(val)
