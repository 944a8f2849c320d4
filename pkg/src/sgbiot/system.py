"""Kronecker-structured stochastic Galerkin saddle-point operator.

Unknowns are ordered by physical variable ``(u1, u2, p1, p2 | pF, pT)``; inside a
variable the spatial coefficients of chaos mode 0 come first, then mode 1, and
so on. A slice of length ``n * n_y`` therefore reshapes to an ``(n_y, n)``
array whose row ``j`` holds chaos mode ``j``. Terms ``(G kron K) x`` are applied
as ``G @ (K @ X.T).T`` and never formed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import FemBlocks

log = logging.getLogger(__name__)

VARIABLES = ("u1", "u2", "p1", "p2", "pF", "pT")


@dataclass(frozen=True)
class PhysicalParams:
    """Poisson ratio, Biot-Willis constant and (rescaled) storage coefficient.

    ``storage`` is either ``"alpha2_over_lambda"`` (``s0 = alpha^2 / lambda``) or
    the value of the rescaled coefficient ``E * s0`` itself.
    """

    nu: float
    alpha: float
    storage: object = "alpha2_over_lambda"

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in (0, 1/2), got {self.nu}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"Biot-Willis constant must lie in (0, 1], got {self.alpha}")
        if isinstance(self.storage, str):
            if self.storage != "alpha2_over_lambda":
                raise ValueError(f"unknown storage mode {self.storage!r}")
        elif not float(self.storage) > 0:
            raise ValueError("storage coefficient must be positive")

    @property
    def mu(self) -> float:
        """Rescaled shear modulus ``2 mu / E``."""
        return 1.0 / (1.0 + self.nu)

    @property
    def lam(self) -> float:
        """Rescaled Lame coefficient ``lambda / E``."""
        return self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def lam_inv(self) -> float:
        return (1.0 + self.nu) * (1.0 - 2.0 * self.nu) / self.nu

    @property
    def s0(self) -> float:
        if isinstance(self.storage, str):
            return self.alpha ** 2 * self.lam_inv
        return float(self.storage)

    @property
    def compatible(self) -> bool:
        """Whether ``alpha^2 / lambda <= 3/2 * s0`` holds."""
        return self.alpha ** 2 * self.lam_inv <= 1.5 * self.s0


@dataclass(frozen=True)
class Layout:
    n_u: int
    n_p: int
    n_0: int
    n_y: int

    @property
    def sizes(self) -> dict:
        return {
            "u1": self.n_u, "u2": self.n_u, "p1": self.n_p,
            "p2": self.n_p, "pF": self.n_0, "pT": self.n_p,
        }

    @property
    def n_x(self) -> int:
        return 2 * self.n_u + 3 * self.n_p + self.n_0

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    def slices(self) -> dict:
        out, start = {}, 0
        for name in VARIABLES:
            stop = start + self.sizes[name] * self.n_y
            out[name] = slice(start, stop)
            start = stop
        return out

    def split(self, x) -> dict:
        """Views of ``x`` per variable, each shaped ``(n_y, n)``."""
        sizes = self.sizes
        return {
            name: x[s].reshape(self.n_y, sizes[name]) for name, s in self.slices().items()
        }

    def coefficient_matrix(self, x) -> np.ndarray:
        """``(n_x, n_y)`` matrix; column ``j`` holds every spatial coefficient of mode ``j``."""
        parts = self.split(x)
        return np.vstack([parts[name].T for name in VARIABLES])

    def from_coefficient_matrix(self, X) -> np.ndarray:
        out, start = [], 0
        for name in VARIABLES:
            n = self.sizes[name]
            out.append(np.asarray(X[start:start + n]).T.ravel())
            start += n
        return np.concatenate(out)


def kronecker_permutation(layout: Layout) -> np.ndarray:
    """Index array ``perm`` with ``x_mode_major = x[perm]``.

    The mode-major ordering groups all variables of chaos mode ``j`` together,
    i.e. ``x_j = (u1_j, u2_j, p1_j, p2_j, pF_j, pT_j)`` for ``j = 0..n_y-1``.
    """
    slices = layout.slices()
    sizes = layout.sizes
    blocks = []
    for j in range(layout.n_y):
        for name in VARIABLES:
            n = sizes[name]
            start = slices[name].start + j * n
            blocks.append(np.arange(start, start + n))
    return np.concatenate(blocks)


class DimensionError(ValueError):
    pass


@dataclass(eq=False)
class SgOperator:
    """Matrix-free ``[[A, B^T], [B, -C]]`` acting on coefficient vectors."""

    fem: FemBlocks
    G: list
    params: PhysicalParams
    M1: int
    M2: int
    layout: Layout = field(init=False)

    def __post_init__(self):
        n_y = self.G[0].shape[0]
        if len(self.G) != 1 + self.M1 + self.M2:
            raise DimensionError(
                f"expected {1 + self.M1 + self.M2} G matrices, got {len(self.G)}"
            )
        if self.fem.M1 != self.M1 or self.fem.M2 != self.M2:
            raise DimensionError(
                f"FEM blocks carry M1={self.fem.M1}, M2={self.fem.M2}; "
                f"operator expects M1={self.M1}, M2={self.M2}"
            )
        for G in self.G:
            if G.shape != (n_y, n_y):
                raise DimensionError("G matrices must all be n_y x n_y")
        self.layout = Layout(self.fem.n_u, self.fem.n_p, self.fem.n_0, n_y)
        self._Gt = [G.T.tocsr() for G in self.G]

    @property
    def shape(self):
        return (self.layout.size, self.layout.size)

    @property
    def n_y(self) -> int:
        return self.layout.n_y

    def _gk(self, k, KX):
        """``(G_k kron K) x`` in row form, given ``KX = (K @ X.T).T``."""
        if k == 0:
            return KX
        return self._Gt[k] @ KX

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.layout.size,):
            raise DimensionError(f"vector has shape {x.shape}, expected ({self.layout.size},)")
        fem, par, lay = self.fem, self.params, self.layout
        mu, li, s0, al = par.mu, par.lam_inv, par.s0, par.alpha
        X = lay.split(x)
        n_y = lay.n_y

        # (K kron I) products want (n, n_y) C-ordered blocks; transpose once
        U = np.ascontiguousarray(np.hstack([X["u1"], X["u2"]]).T)      # (2 n_u, n_y)
        P12 = np.ascontiguousarray(np.vstack([X["p1"], X["p2"]]).T)    # (n_p, 2 n_y)
        PF = np.ascontiguousarray(X["pF"].T)
        PT = np.ascontiguousarray(X["pT"].T)
        P1 = P12[:, :n_y]

        yU = np.zeros((n_y, 2 * lay.n_u))
        y12 = np.zeros((n_y, 2 * lay.n_p))
        for k in range(self.M1 + 1):
            EU = np.ascontiguousarray((fem.elastic[k] @ U).T)
            CP = fem.Ct[k] @ P12
            CP = np.hstack([CP[:, :n_y].T, CP[:, n_y:].T])
            yU += self._gk(k, EU)
            y12 += self._gk(k, CP)
        yU *= mu
        y1 = li * y12[:, :lay.n_p]
        y2 = s0 * y12[:, lay.n_p:]

        # coupling blocks
        yU[:, :lay.n_u] += (fem.B1.T @ PT).T
        yU[:, lay.n_u:] += (fem.B2.T @ PT).T
        y1 += ((al * li) * (fem.Cb.T @ PF) - li * (fem.C.T @ PT)).T
        y2 += s0 * (fem.Cb.T @ PF).T

        yF = (fem.Cb @ (al * li * P1 + s0 * P12[:, n_y:])).T
        for k in range(self.M2 + 1):
            kk = 0 if k == 0 else self.M1 + k
            yF -= self._gk(kk, np.ascontiguousarray((fem.D[k] @ PF).T))
        yT = (fem.B1 @ U[:lay.n_u] + fem.B2 @ U[lay.n_u:] - li * (fem.C @ P1)).T

        return np.concatenate([
            yU[:, :lay.n_u].ravel(), yU[:, lay.n_u:].ravel(),
            y1.ravel(), y2.ravel(), yF.ravel(), yT.ravel(),
        ])

    __call__ = matvec

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator

        return LinearOperator(self.shape, matvec=self.matvec, dtype=float)


def build_operator(fem: FemBlocks, G: list, params: PhysicalParams, M1: int | None = None,
                   M2: int | None = None) -> SgOperator:
    """Bundle spatial blocks, coupling matrices and parameters into an operator.

    ``G = [G_0, G_1..G_M1 (elasticity), G_{M1+1}..G_{M1+M2} (conductivity)]``.
    """
    M1 = fem.M1 if M1 is None else M1
    M2 = fem.M2 if M2 is None else M2
    if not params.compatible:
        log.warning(
            "alpha^2/lambda=%.3g exceeds 3/2 * s0=%.3g; well-posedness bound not guaranteed",
            params.alpha ** 2 * params.lam_inv, 1.5 * params.s0,
        )
    return SgOperator(fem, list(G), params, M1, M2)


def apply_operator(op: SgOperator, x) -> np.ndarray:
    return op.matvec(x)


def build_rhs(fem: FemBlocks, n_y: int) -> np.ndarray:
    """Loads in chaos mode 0 of ``u1``, ``u2`` and ``pF``; zero elsewhere."""
    lay = Layout(fem.n_u, fem.n_p, fem.n_0, n_y)
    b = np.zeros(lay.size)
    parts = lay.split(b)
    parts["u1"][0] = fem.f1
    parts["u2"][0] = fem.f2
    parts["pF"][0] = fem.g
    return b


def energy_norm(x, fem: FemBlocks, params: PhysicalParams, n_y: int | None = None) -> float:
    """Weighted norm ``sqrt(x^T P x)`` with ``P`` the block preconditioner matrix."""
    from .precond import apply_norm_matrix

    x = np.asarray(x, dtype=float)
    if n_y is None:
        n_y = x.size // fem.n_x
    val = float(x @ apply_norm_matrix(fem, params, n_y, x))
    return math.sqrt(max(val, 0.0))
