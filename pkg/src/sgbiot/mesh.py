"""Structured quadrilateral meshes on rectangles with Q1/Q2 node sets.

Nodes are numbered lexicographically with x fastest. Element ``e = ex + nx*ey``
has its local nodes in tensor order as well (local x index fastest), so a Q1
element lists ``(0,0), (1,0), (0,1), (1,1)`` and a Q2 element lists the nine
nodes of its 3x3 sub-grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshSizingError(ValueError):
    """Domain side lengths are not multiples of the element size."""


@dataclass(frozen=True)
class RectDomain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)


@dataclass(frozen=True)
class Segment:
    """Closed axis-aligned boundary segment from (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x0 != self.x1 and self.y0 != self.y1:
            raise ValueError("segments must be horizontal or vertical")

    @property
    def horizontal(self) -> bool:
        return self.y0 == self.y1

    @property
    def length(self) -> float:
        return abs(self.x1 - self.x0) + abs(self.y1 - self.y0)

    def contains(self, x, y, tol=1e-12):
        """Vectorised point-membership test (endpoints included)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xlo, xhi = sorted((self.x0, self.x1))
        ylo, yhi = sorted((self.y0, self.y1))
        return (
            (x >= xlo - tol) & (x <= xhi + tol) & (y >= ylo - tol) & (y <= yhi + tol)
        )


def _contains_any(segments, x, y):
    mask = np.zeros(np.shape(x), dtype=bool)
    for seg in segments:
        mask |= seg.contains(x, y)
    return mask


@dataclass(frozen=True)
class Traction:
    """Boundary traction ``sigma n = t(x)`` applied on a set of segments.

    ``func(x, y)`` returns the two traction components evaluated at arrays of
    boundary points.
    """

    segments: tuple[Segment, ...]
    func: object

    @classmethod
    def constant(cls, segments, value):
        tx, ty = (float(v) for v in value)

        def func(x, y):
            return np.full(np.shape(x), tx), np.full(np.shape(x), ty)

        return cls(tuple(segments), func)


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet segments for the displacement and the fluid pressure.

    A node is constrained when it lies on the closure of any listed segment.
    """

    u_dirichlet: tuple[Segment, ...]
    p_dirichlet: tuple[Segment, ...]
    traction: Traction | None = None


@dataclass(frozen=True, eq=False)
class Mesh:
    domain: RectDomain
    level: int
    h: float
    nx: int
    ny: int
    q1_nodes: np.ndarray = field(repr=False)
    q2_nodes: np.ndarray = field(repr=False)
    q1_elements: np.ndarray = field(repr=False)
    q2_elements: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def q1_shape(self) -> tuple[int, int]:
        """(points in x, points in y) of the Q1 node grid."""
        return self.nx + 1, self.ny + 1

    @property
    def q2_shape(self) -> tuple[int, int]:
        return 2 * self.nx + 1, 2 * self.ny + 1

    def element_origins(self) -> np.ndarray:
        """Lower-left corner of every element, shape ``(n_elements, 2)``."""
        return self.q1_nodes[self.q1_elements[:, 0]]


def _grid(x_min, y_min, step, nx_pts, ny_pts):
    ix, iy = np.meshgrid(np.arange(nx_pts), np.arange(ny_pts))
    return np.column_stack(
        [x_min + step * ix.ravel().astype(float), y_min + step * iy.ravel().astype(float)]
    )


def _element_count(length, h):
    n = length / h
    count = int(round(n))
    if count < 1 or abs(n - count) > 1e-9 * max(1.0, n):
        raise MeshSizingError(
            f"side length {length} is not a multiple of element size {h}"
        )
    return count


def build_mesh(domain: RectDomain, level: int) -> Mesh:
    """Uniform square mesh with element side ``2**-(level-1)``."""
    if level < 1:
        raise MeshSizingError(f"level must be positive, got {level}")
    h = 2.0 ** (-(level - 1))
    nx = _element_count(domain.width, h)
    ny = _element_count(domain.height, h)

    q1_nodes = _grid(domain.x_min, domain.y_min, h, nx + 1, ny + 1)
    q2_nodes = _grid(domain.x_min, domain.y_min, 0.5 * h, 2 * nx + 1, 2 * ny + 1)

    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    ex = ex.ravel()
    ey = ey.ravel()
    loc = np.arange(2)
    q1_elements = (
        (ex[:, None, None] + loc[None, None, :])
        + (ey[:, None, None] + loc[None, :, None]) * (nx + 1)
    ).reshape(-1, 4)
    loc = np.arange(3)
    q2_elements = (
        (2 * ex[:, None, None] + loc[None, None, :])
        + (2 * ey[:, None, None] + loc[None, :, None]) * (2 * nx + 1)
    ).reshape(-1, 9)

    return Mesh(domain, level, h, nx, ny, q1_nodes, q2_nodes, q1_elements, q2_elements)


@dataclass(frozen=True, eq=False)
class DofMaps:
    """Numbering of free displacement and fluid-pressure unknowns.

    ``u_index[node]`` is the displacement dof of a Q2 node or -1 when the node is
    u-constrained; ``p0_index[node]`` likewise for Q1 nodes and p-constraints.
    All Q1 nodes carry a ``p_T``, ``p_1`` and ``p_2`` unknown.
    """

    u_constrained: np.ndarray = field(repr=False)
    p_constrained: np.ndarray = field(repr=False)
    u_free: np.ndarray = field(repr=False)
    p0_free: np.ndarray = field(repr=False)
    u_index: np.ndarray = field(repr=False)
    p0_index: np.ndarray = field(repr=False)
    n_u: int = 0
    n_p: int = 0
    n_0: int = 0

    @property
    def n_x(self) -> int:
        return 2 * self.n_u + 3 * self.n_p + self.n_0


def _numbering(constrained):
    free = np.flatnonzero(~constrained)
    index = np.full(constrained.size, -1, dtype=np.int64)
    index[free] = np.arange(free.size)
    return free, index


def classify_dofs(mesh: Mesh, bc: BoundarySpec) -> DofMaps:
    for seg in bc.u_dirichlet + bc.p_dirichlet:
        if not _on_boundary(mesh.domain, seg):
            raise ValueError(f"{seg} does not lie on the boundary of {mesh.domain}")
    u_con = _contains_any(bc.u_dirichlet, mesh.q2_nodes[:, 0], mesh.q2_nodes[:, 1])
    p_con = _contains_any(bc.p_dirichlet, mesh.q1_nodes[:, 0], mesh.q1_nodes[:, 1])
    u_free, u_index = _numbering(u_con)
    p0_free, p0_index = _numbering(p_con)
    return DofMaps(
        u_constrained=u_con,
        p_constrained=p_con,
        u_free=u_free,
        p0_free=p0_free,
        u_index=u_index,
        p0_index=p0_index,
        n_u=int(u_free.size),
        n_p=int(mesh.q1_nodes.shape[0]),
        n_0=int(p0_free.size),
    )


def _on_boundary(domain: RectDomain, seg: Segment) -> bool:
    d = domain
    if seg.horizontal:
        return seg.y0 in (d.y_min, d.y_max) and min(seg.x0, seg.x1) >= d.x_min and max(
            seg.x0, seg.x1
        ) <= d.x_max
    return seg.x0 in (d.x_min, d.x_max) and min(seg.y0, seg.y1) >= d.y_min and max(
        seg.y0, seg.y1
    ) <= d.y_max


def boundary_node_classes(mesh: Mesh, bc: BoundarySpec, space: str = "q1") -> dict:
    """Partition the boundary nodes of a grid into constraint classes.

    Returns a dict with keys ``"u"``, ``"p"``, ``"both"``, ``"neither"`` mapping to
    node index arrays.
    """
    nodes = mesh.q1_nodes if space == "q1" else mesh.q2_nodes
    x, y = nodes[:, 0], nodes[:, 1]
    d = mesh.domain
    on_bnd = (x == d.x_min) | (x == d.x_max) | (y == d.y_min) | (y == d.y_max)
    u = _contains_any(bc.u_dirichlet, x, y) & on_bnd
    p = _contains_any(bc.p_dirichlet, x, y) & on_bnd
    return {
        "u": np.flatnonzero(u & ~p),
        "p": np.flatnonzero(p & ~u),
        "both": np.flatnonzero(u & p),
        "neither": np.flatnonzero(on_bnd & ~u & ~p),
    }
