"""Finite element matrices for the Q2-Q1-Q1-Q1-Q1 discretisation.

Every integral uses a 3x3 tensor Gauss-Legendre rule per element. Coefficient
fields are sampled at the quadrature points. Constrained (homogeneous
Dirichlet) unknowns are eliminated by dropping their rows/columns.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import DofMaps, Mesh, Traction


class AssemblyError(ValueError):
    pass


class ScalarField:
    """A real-valued function of position, ``field(x, y) -> array``."""

    def __init__(self, func, tag="user"):
        self.func = func
        self.tag = tag

    @classmethod
    def constant(cls, value):
        value = float(value)

        def func(x, y):
            return np.full(np.shape(x), value)

        out = cls(func, tag="constant")
        out.value = value
        return out

    def __call__(self, x, y):
        return np.broadcast_to(np.asarray(self.func(x, y), dtype=float), np.shape(x))

    def __repr__(self):
        if self.tag == "constant":
            return f"ScalarField.constant({self.value!r})"
        return f"ScalarField(tag={self.tag!r})"


def as_field(value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if callable(value):
        return ScalarField(value)
    return ScalarField.constant(value)


# --- reference element ----------------------------------------------------

_GAUSS_PTS, _GAUSS_WTS = np.polynomial.legendre.leggauss(3)


def _lagrange_1d(order, t):
    """Values and derivatives of the 1D Lagrange basis on [-1, 1]."""
    t = np.asarray(t, dtype=float)
    if order == 1:
        val = np.stack([0.5 * (1 - t), 0.5 * (1 + t)], axis=-1)
        der = np.stack([-0.5 * np.ones_like(t), 0.5 * np.ones_like(t)], axis=-1)
    else:
        val = np.stack([0.5 * t * (t - 1), 1 - t * t, 0.5 * t * (t + 1)], axis=-1)
        der = np.stack([t - 0.5, -2 * t, t + 0.5], axis=-1)
    return val, der


def tensor_basis(order, xi, eta):
    """Tensor-product basis on the reference square.

    Returns ``(N, dN_dxi, dN_deta)`` with shape ``(len(xi), (order+1)**2)``,
    local index = i + (order+1)*j.
    """
    vx, dx = _lagrange_1d(order, xi)
    vy, dy = _lagrange_1d(order, eta)
    n = order + 1
    N = (vy[:, :, None] * vx[:, None, :]).reshape(-1, n * n)
    Nx = (vy[:, :, None] * dx[:, None, :]).reshape(-1, n * n)
    Ny = (dy[:, :, None] * vx[:, None, :]).reshape(-1, n * n)
    return N, Nx, Ny


@dataclass(frozen=True)
class _Quadrature:
    xi: np.ndarray
    eta: np.ndarray
    weights: np.ndarray


def _quadrature():
    xi, eta = np.meshgrid(_GAUSS_PTS, _GAUSS_PTS)
    w = np.outer(_GAUSS_WTS, _GAUSS_WTS)
    return _Quadrature(xi.ravel(), eta.ravel(), w.ravel())


_QUAD = _quadrature()


class _ElementData:
    """Quadrature points, weights and physical basis gradients for a mesh."""

    def __init__(self, mesh: Mesh):
        q = _QUAD
        h = mesh.h
        origins = mesh.element_origins()
        self.x = origins[:, 0:1] + 0.5 * h * (q.xi[None, :] + 1)
        self.y = origins[:, 1:2] + 0.5 * h * (q.eta[None, :] + 1)
        self.wdet = q.weights * (0.25 * h * h)
        self.N1, n1x, n1y = tensor_basis(1, q.xi, q.eta)
        self.N2, n2x, n2y = tensor_basis(2, q.xi, q.eta)
        s = 2.0 / h
        self.dN1 = (s * n1x, s * n1y)
        self.dN2 = (s * n2x, s * n2y)

    def weights(self, coeff: ScalarField | None):
        if coeff is None:
            return np.broadcast_to(self.wdet, self.x.shape)
        c = coeff(self.x, self.y)
        if not np.all(np.isfinite(c)):
            raise AssemblyError("coefficient field is not finite at a quadrature point")
        return c * self.wdet


@functools.lru_cache(maxsize=4)
def _element_data(mesh: Mesh) -> _ElementData:
    return _ElementData(mesh)


def _local(w, left, right, symmetric=False):
    loc = np.einsum("eq,qa,qb->eab", w, left, right, optimize=True)
    if symmetric:
        loc = 0.5 * (loc + loc.transpose(0, 2, 1))
    return loc


def _scatter(local, rows, cols, shape):
    """Sum element matrices into a CSR matrix, dropping rows/cols indexed -1."""
    ne, na, nb = local.shape
    r = np.broadcast_to(rows[:, :, None], (ne, na, nb)).ravel()
    c = np.broadcast_to(cols[:, None, :], (ne, na, nb)).ravel()
    v = local.ravel()
    keep = (r >= 0) & (c >= 0)
    mat = sp.coo_matrix((v[keep], (r[keep], c[keep])), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_elasticity(mesh: Mesh, dofs: DofMaps, coeff) -> dict:
    """Strain-strain blocks weighted by ``coeff``.

    ``A11[i, l] = int c eps(phi_i e1) : eps(phi_l e1)``; ``A21[i, l]`` pairs the
    test function ``phi_i e2`` with the trial function ``phi_l e1`` (so it is the
    (u2, u1) block of the vector operator) and ``A12 = A21.T``.
    """
    ed = _element_data(mesh)
    w = ed.weights(as_field(coeff))
    dx, dy = ed.dN2
    rows = dofs.u_index[mesh.q2_elements]
    shape = (dofs.n_u, dofs.n_u)
    xx = _local(w, dx, dx, symmetric=True)
    yy = _local(w, dy, dy, symmetric=True)
    A11 = _scatter(xx + 0.5 * yy, rows, rows, shape)
    A22 = _scatter(0.5 * xx + yy, rows, rows, shape)
    A21 = _scatter(0.5 * _local(w, dx, dy), rows, rows, shape)
    A12 = A21.T.tocsr()
    A12.sort_indices()
    return {"A11": A11, "A12": A12, "A21": A21, "A22": A22}


def assemble_divergence(mesh: Mesh, dofs: DofMaps) -> dict:
    """``B_s[r, l] = -int phi_r dphi_l/dx_s`` over all Q1 rows, free Q2 columns."""
    ed = _element_data(mesh)
    w = ed.weights(None)
    rows = mesh.q1_elements
    cols = dofs.u_index[mesh.q2_elements]
    shape = (dofs.n_p, dofs.n_u)
    dx, dy = ed.dN2
    B1 = _scatter(-_local(w, ed.N1, dx), rows, cols, shape)
    B2 = _scatter(-_local(w, ed.N1, dy), rows, cols, shape)
    return {"B1": B1, "B2": B2}


def assemble_mass(mesh: Mesh, dofs: DofMaps, weight=1.0, space="full"):
    """Q1 mass matrix weighted by ``weight``; ``space`` is "full" or "restricted"."""
    ed = _element_data(mesh)
    w = ed.weights(as_field(weight))
    if space == "full":
        idx = mesh.q1_elements
        n = dofs.n_p
    elif space == "restricted":
        idx = dofs.p0_index[mesh.q1_elements]
        n = dofs.n_0
    else:
        raise ValueError(f"unknown space {space!r}")
    return _scatter(_local(w, ed.N1, ed.N1, symmetric=True), idx, idx, (n, n))


def assemble_stiffness(mesh: Mesh, dofs: DofMaps, weight=1.0):
    """Weighted Q1 stiffness matrix on the p-unconstrained space."""
    ed = _element_data(mesh)
    w = ed.weights(as_field(weight))
    dx, dy = ed.dN1
    loc = _local(w, dx, dx, symmetric=True) + _local(w, dy, dy, symmetric=True)
    idx = dofs.p0_index[mesh.q1_elements]
    return _scatter(loc, idx, idx, (dofs.n_0, dofs.n_0))


def _edge_load(mesh: Mesh, dofs: DofMaps, traction: Traction):
    """Boundary integral of ``t . v`` over the traction segments."""
    f1 = np.zeros(dofs.n_u)
    f2 = np.zeros(dofs.n_u)
    h = mesh.h
    nodes = mesh.q2_nodes
    nxq, _ = mesh.q2_shape
    vals, _ = _lagrange_1d(2, _GAUSS_PTS)
    for seg in traction.segments:
        lo, hi = sorted((seg.x0, seg.x1)) if seg.horizontal else sorted((seg.y0, seg.y1))
        base = mesh.domain.x_min if seg.horizontal else mesh.domain.y_min
        k_lo = (lo - base) / h
        k_hi = (hi - base) / h
        if abs(k_lo - round(k_lo)) > 1e-9 or abs(k_hi - round(k_hi)) > 1e-9:
            raise AssemblyError(f"traction segment {seg} does not end on mesh nodes")
        k_lo, k_hi = int(round(k_lo)), int(round(k_hi))
        if seg.horizontal:
            j = int(round((seg.y0 - mesh.domain.y_min) / (0.5 * h)))
            edge_nodes = [[2 * k + a + j * nxq for a in range(3)] for k in range(k_lo, k_hi)]
        else:
            i = int(round((seg.x0 - mesh.domain.x_min) / (0.5 * h)))
            edge_nodes = [[i + (2 * k + a) * nxq for a in range(3)] for k in range(k_lo, k_hi)]
        if not edge_nodes:
            continue
        edge_nodes = np.asarray(edge_nodes)
        start = nodes[edge_nodes[:, 0]]
        t = 0.5 * h * (_GAUSS_PTS + 1)
        if seg.horizontal:
            qx = start[:, 0:1] + t[None, :]
            qy = np.broadcast_to(start[:, 1:2], qx.shape)
        else:
            qy = start[:, 1:2] + t[None, :]
            qx = np.broadcast_to(start[:, 0:1], qy.shape)
        tx, ty = traction.func(qx, qy)
        tx = np.broadcast_to(np.asarray(tx, dtype=float), qx.shape)
        ty = np.broadcast_to(np.asarray(ty, dtype=float), qx.shape)
        wq = _GAUSS_WTS * (0.5 * h)
        loc1 = np.einsum("eq,qa->ea", tx * wq, vals)
        loc2 = np.einsum("eq,qa->ea", ty * wq, vals)
        idx = dofs.u_index[edge_nodes]
        keep = idx >= 0
        np.add.at(f1, idx[keep], loc1[keep])
        np.add.at(f2, idx[keep], loc2[keep])
    return f1, f2


def assemble_loads(mesh: Mesh, dofs: DofMaps, body_force=(0.0, 0.0), source=0.0,
                   traction: Traction | None = None) -> dict:
    ed = _element_data(mesh)
    out = {}
    for name, comp in zip(("f1", "f2"), body_force):
        w = ed.weights(as_field(comp))
        loc = np.einsum("eq,qa->ea", w, ed.N2)
        idx = dofs.u_index[mesh.q2_elements]
        vec = np.zeros(dofs.n_u)
        keep = idx >= 0
        np.add.at(vec, idx[keep], loc[keep])
        out[name] = vec
    if traction is not None:
        t1, t2 = _edge_load(mesh, dofs, traction)
        out["f1"] = out["f1"] + t1
        out["f2"] = out["f2"] + t2
    w = ed.weights(as_field(source))
    loc = np.einsum("eq,qa->ea", w, ed.N1)
    idx = dofs.p0_index[mesh.q1_elements]
    g = np.zeros(dofs.n_0)
    keep = idx >= 0
    np.add.at(g, idx[keep], loc[keep])
    out["g"] = g
    return out


@dataclass(eq=False)
class FemBlocks:
    """All spatial matrices and load vectors of the discrete five-field system.

    Lists indexed by ``k`` hold the mean term at ``k = 0`` followed by one entry
    per stochastic mode.
    """

    A11: list
    A12: list
    A21: list
    A22: list
    B1: sp.csr_matrix
    B2: sp.csr_matrix
    C: sp.csr_matrix
    Ct: list
    Cb: sp.csr_matrix
    Cbar: sp.csr_matrix
    Cbar_b: sp.csr_matrix
    D: list
    f1: np.ndarray
    f2: np.ndarray
    g: np.ndarray
    n_u: int = 0
    n_p: int = 0
    n_0: int = 0
    elastic: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.elastic:
            self.elastic = [
                sp.bmat([[a11, a12], [a21, a22]], format="csr")
                for a11, a12, a21, a22 in zip(self.A11, self.A12, self.A21, self.A22)
            ]

    @property
    def n_x(self) -> int:
        return 2 * self.n_u + 3 * self.n_p + self.n_0

    @property
    def M1(self) -> int:
        return len(self.A11) - 1

    @property
    def M2(self) -> int:
        return len(self.D) - 1


def assemble_fem_blocks(mesh: Mesh, dofs: DofMaps, young, conductivity,
                        body_force=(0.0, 0.0), source=0.0, traction=None) -> FemBlocks:
    """Assemble every block for the given Young-modulus and conductivity expansions.

    ``young`` and ``conductivity`` are :class:`~sgbiot.stochastic.RandomFieldExpansion`
    instances (mean field plus mode fields).
    """
    e_fields = [young.mean] + list(young.modes)
    k_fields = [conductivity.mean] + list(conductivity.modes)

    ed = _element_data(mesh)
    e0 = young.mean(ed.x, ed.y)
    if not np.all(e0 > 0):
        raise AssemblyError("mean Young modulus must be positive at every quadrature point")
    inv_e0 = ScalarField(lambda x, y: 1.0 / young.mean(x, y), tag="inverse-mean")

    A11, A12, A21, A22 = [], [], [], []
    for e in e_fields:
        blk = assemble_elasticity(mesh, dofs, e)
        A11.append(blk["A11"])
        A12.append(blk["A12"])
        A21.append(blk["A21"])
        A22.append(blk["A22"])
    div = assemble_divergence(mesh, dofs)
    C = assemble_mass(mesh, dofs, 1.0)
    Ct = [assemble_mass(mesh, dofs, e) for e in e_fields]
    Cb = C[dofs.p0_free, :].tocsr()
    Cbar = assemble_mass(mesh, dofs, inv_e0)
    Cbar_b = assemble_mass(mesh, dofs, inv_e0, space="restricted")
    D = [assemble_stiffness(mesh, dofs, k) for k in k_fields]
    loads = assemble_loads(mesh, dofs, body_force, source, traction)
    return FemBlocks(
        A11=A11, A12=A12, A21=A21, A22=A22,
        B1=div["B1"], B2=div["B2"],
        C=C, Ct=Ct, Cb=Cb, Cbar=Cbar, Cbar_b=Cbar_b, D=D,
        f1=loads["f1"], f2=loads["f2"], g=loads["g"],
        n_u=dofs.n_u, n_p=dofs.n_p, n_0=dofs.n_0,
    )
