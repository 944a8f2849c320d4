"""Block-diagonal, parameter-robust preconditioner for the SG saddle-point system.

``P = diag(mu*AA, mu*AA, lam_inv*Ct0, s0*Ct0, S1, (1/mu + lam_inv)*Cbar)`` with
every spatial block repeated over the chaos modes (``I kron K``). ``AA`` is the
vector-Laplacian surrogate ``2(A11 + A22)/3`` of the mean elasticity blocks and
``S1 = (alpha^2 lam_inv + s0) Cbar_b + D0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import FemBlocks
from .system import Layout, PhysicalParams


class FactorizationError(RuntimeError):
    """A preconditioner block is not symmetric positive definite."""


class SymmetricFactor:
    """Sparse LU of an SPD matrix with a symmetric fill-reducing ordering.

    With a symmetric column ordering and no off-diagonal pivoting the LU factors
    coincide with an LDL^T factorisation, so the sign of ``U``'s diagonal is the
    sign of the pivots and certifies positive definiteness.
    """

    def __init__(self, matrix, name: str):
        self.name = name
        A = sp.csc_matrix(matrix)
        self.matrix = A.tocsr()
        self.shape = A.shape
        if A.shape[0] == 0:
            self._lu = None
            return
        asym = abs(A - A.T).max() if A.nnz else 0.0
        scale = abs(A).max() if A.nnz else 0.0
        if asym > 1e-12 * max(scale, 1e-300):
            raise FactorizationError(f"block {name!r} is not symmetric")
        try:
            lu = splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise FactorizationError(f"factorization of block {name!r} failed: {exc}") from exc
        pivots = lu.U.diagonal()
        if not np.all(pivots > 0) or not np.all(np.isfinite(pivots)):
            raise FactorizationError(f"block {name!r} is not positive definite")
        self._lu = lu

    def solve(self, rhs):
        if self._lu is None:
            return np.zeros_like(rhs)
        return self._lu.solve(np.asarray(rhs, dtype=float))


@dataclass(eq=False)
class BlockPreconditioner:
    """Factorised spatial blocks and their scalar multipliers."""

    elastic: SymmetricFactor
    mass: SymmetricFactor
    schur_flux: SymmetricFactor
    mass_bar: SymmetricFactor
    params: PhysicalParams
    layout: Layout

    @property
    def scales(self) -> dict:
        p = self.params
        return {
            "u1": p.mu, "u2": p.mu, "p1": p.lam_inv, "p2": p.s0,
            "pF": 1.0, "pT": 1.0 / p.mu + p.lam_inv,
        }

    def _factor(self, name):
        return {
            "u1": self.elastic, "u2": self.elastic, "p1": self.mass,
            "p2": self.mass, "pF": self.schur_flux, "pT": self.mass_bar,
        }[name]

    def solve(self, r) -> np.ndarray:
        """``P^{-1} r``; each spatial block is solved for all chaos modes at once."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.layout.size,):
            raise ValueError(f"vector has shape {r.shape}, expected ({self.layout.size},)")
        out = np.empty_like(r)
        parts_in = self.layout.split(r)
        parts_out = self.layout.split(out)
        scales = self.scales
        for name in parts_in:
            z = self._factor(name).solve(parts_in[name].T)
            parts_out[name][:] = (z / scales[name]).T
        return out

    __call__ = solve

    def matvec(self, x) -> np.ndarray:
        """``P x`` using the stored (unfactorised) blocks."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        parts_in = self.layout.split(x)
        parts_out = self.layout.split(out)
        scales = self.scales
        for name in parts_in:
            K = self._factor(name).matrix
            parts_out[name][:] = scales[name] * (K @ parts_in[name].T).T
        return out

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator

        n = self.layout.size
        return LinearOperator((n, n), matvec=self.solve, dtype=float)


def spatial_blocks(fem: FemBlocks, params: PhysicalParams) -> dict:
    """The four unscaled spatial matrices ``AA, Ct0, S1, Cbar``."""
    AA = (2.0 / 3.0) * (fem.A11[0] + fem.A22[0])
    S1 = (params.alpha ** 2 * params.lam_inv + params.s0) * fem.Cbar_b + fem.D[0]
    return {"AA": AA.tocsr(), "Ct0": fem.Ct[0], "S1": S1.tocsr(), "Cbar": fem.Cbar}


def build_preconditioner(fem: FemBlocks, params: PhysicalParams, n_y: int) -> BlockPreconditioner:
    blocks = spatial_blocks(fem, params)
    return BlockPreconditioner(
        elastic=SymmetricFactor(blocks["AA"], "AA"),
        mass=SymmetricFactor(blocks["Ct0"], "Ct0"),
        schur_flux=SymmetricFactor(blocks["S1"], "S1"),
        mass_bar=SymmetricFactor(blocks["Cbar"], "Cbar"),
        params=params,
        layout=Layout(fem.n_u, fem.n_p, fem.n_0, n_y),
    )


def apply_preconditioner(P: BlockPreconditioner, r) -> np.ndarray:
    return P.solve(r)


def apply_norm_matrix(fem: FemBlocks, params: PhysicalParams, n_y: int, x) -> np.ndarray:
    """``P x`` without factorising anything."""
    blocks = spatial_blocks(fem, params)
    lay = Layout(fem.n_u, fem.n_p, fem.n_0, n_y)
    mats = {
        "u1": params.mu * blocks["AA"], "u2": params.mu * blocks["AA"],
        "p1": params.lam_inv * blocks["Ct0"], "p2": params.s0 * blocks["Ct0"],
        "pF": blocks["S1"], "pT": (1.0 / params.mu + params.lam_inv) * blocks["Cbar"],
    }
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    parts_in = lay.split(x)
    parts_out = lay.split(out)
    for name, K in mats.items():
        parts_out[name][:] = (K @ parts_in[name].T).T
    return out
