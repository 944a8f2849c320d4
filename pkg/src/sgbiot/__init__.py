"""Stochastic Galerkin mixed finite elements for the parametric five-field Biot model."""
from __future__ import annotations

from .assembly import FemBlocks, ScalarField, assemble_fem_blocks
from .mesh import BoundarySpec, RectDomain, Segment, Traction, build_mesh, classify_dofs
from .precond import BlockPreconditioner, apply_preconditioner, build_preconditioner
from .solver import SolveReport, minres_solve
from .stochastic import RandomFieldExpansion, g_matrices, total_degree_set
from .system import PhysicalParams, SgOperator, apply_operator, build_operator, build_rhs, energy_norm

__version__ = "0.1.0"

__all__ = [
    "BlockPreconditioner", "BoundarySpec", "FemBlocks", "PhysicalParams", "RandomFieldExpansion",
    "RectDomain", "ScalarField", "Segment", "SgOperator", "SolveReport", "Traction",
    "apply_operator", "apply_preconditioner", "assemble_fem_blocks", "build_mesh",
    "build_operator", "build_preconditioner", "build_rhs", "classify_dofs", "energy_norm",
    "g_matrices", "minres_solve", "total_degree_set",
]
