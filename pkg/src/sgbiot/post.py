"""Moments, parameter-point samples and file export of SG solutions."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .mesh import DofMaps, Mesh
from .stochastic import MultiIndexSet, evaluate_basis
from .system import VARIABLES, Layout

FORMATS = ("csv", "vtk")


@dataclass(eq=False)
class SgSolution:
    """Chaos coefficients ``X`` (``n_x x n_y``); column ``j`` is chaos mode ``j``."""

    X: np.ndarray = field(repr=False)
    mesh: Mesh
    dofs: DofMaps
    index_set: MultiIndexSet
    half_widths: list

    def __post_init__(self):
        self.layout = Layout(self.dofs.n_u, self.dofs.n_p, self.dofs.n_0, self.index_set.n_y)
        if self.X.shape != (self.layout.n_x, self.layout.n_y):
            raise ValueError(
                f"coefficient matrix has shape {self.X.shape}, expected "
                f"({self.layout.n_x}, {self.layout.n_y})"
            )

    @classmethod
    def from_vector(cls, x, mesh, dofs, index_set, half_widths):
        lay = Layout(dofs.n_u, dofs.n_p, dofs.n_0, index_set.n_y)
        return cls(lay.coefficient_matrix(np.asarray(x)), mesh, dofs, index_set,
                   list(half_widths))

    def rows(self, variable: str) -> np.ndarray:
        """Coefficient rows of one variable, shape ``(n, n_y)``."""
        if variable not in VARIABLES:
            raise KeyError(f"unknown variable {variable!r}; expected one of {VARIABLES}")
        start = 0
        for name in VARIABLES:
            n = self.layout.sizes[name]
            if name == variable:
                return self.X[start:start + n]
            start += n
        raise AssertionError("unreachable")

    def to_nodes(self, variable: str, values) -> np.ndarray:
        """Scatter dof values (leading axis) onto every native node; constrained nodes get 0."""
        values = np.asarray(values)
        if variable in ("u1", "u2"):
            n_nodes, free = self.mesh.q2_nodes.shape[0], self.dofs.u_free
        elif variable == "pF":
            n_nodes, free = self.mesh.q1_nodes.shape[0], self.dofs.p0_free
        else:
            return values
        out = np.zeros((n_nodes,) + values.shape[1:])
        out[free] = values
        return out


def mean_field(sol: SgSolution, variable: str) -> np.ndarray:
    return sol.to_nodes(variable, sol.rows(variable)[:, 0])


def variance_field(sol: SgSolution, variable: str) -> np.ndarray:
    rows = sol.rows(variable)
    return sol.to_nodes(variable, np.sum(rows[:, 1:] ** 2, axis=1))


def sample_solution(sol: SgSolution, Y, variables=VARIABLES) -> dict:
    """Nodal fields at parameter point(s) ``Y``; shape ``(nodes,)`` or ``(nodes, N)``."""
    psi = evaluate_basis(sol.index_set, sol.half_widths, Y)
    out = {}
    for name in variables:
        out[name] = sol.to_nodes(name, sol.rows(name) @ psi.T)
    return out


def node_grid(mesh: Mesh, n_values: int):
    """Node coordinates and grid shape matching a nodal array of ``n_values``."""
    if n_values == mesh.q1_nodes.shape[0]:
        return mesh.q1_nodes, mesh.q1_shape
    if n_values == mesh.q2_nodes.shape[0]:
        return mesh.q2_nodes, mesh.q2_shape
    raise ValueError(f"{n_values} values match neither the Q1 nor the Q2 node grid")


def export_fields(fields: dict, mesh: Mesh, fmt: str, path) -> list:
    """Write nodal fields to disk.

    CSV writes one file per field, ``<path>/<name>.csv``. VTK groups fields by
    node grid and writes ``<path>/q1.vtk`` and/or ``<path>/q2.vtk``. Returns the
    list of written paths.
    """
    fmt = fmt.lower()
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    os.makedirs(path, exist_ok=True)
    written = []
    if fmt == "csv":
        for name, values in fields.items():
            target = os.path.join(path, f"{name}.csv")
            write_csv(target, mesh, values)
            written.append(target)
        return written
    groups: dict = {}
    for name, values in fields.items():
        n = np.asarray(values).shape[0]
        groups.setdefault(n, {})[name] = values
    for n, group in groups.items():
        nodes, shape = node_grid(mesh, n)
        tag = "q1" if nodes is mesh.q1_nodes else "q2"
        target = os.path.join(path, f"{tag}.vtk")
        write_vtk(target, nodes, shape, group)
        written.append(target)
    return written


def write_csv(target, mesh: Mesh, values) -> None:
    values = np.asarray(values, dtype=float)
    nodes, _ = node_grid(mesh, values.shape[0])
    data = np.column_stack([nodes, values])
    np.savetxt(target, data, delimiter=",", header="x,y,value", comments="",
               fmt="%.17g", newline="\n")


def read_csv(target) -> np.ndarray:
    return np.loadtxt(target, delimiter=",", skiprows=1, ndmin=2)


def write_vtk(target, nodes, shape, fields: dict, title="sgbiot fields") -> None:
    nx, ny = shape
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {nx} {ny} 1",
        f"POINTS {nx * ny} double",
    ]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in nodes]
    lines.append(f"POINT_DATA {nx * ny}")
    for name, values in fields.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in np.asarray(values, dtype=float)]
    with open(target, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
