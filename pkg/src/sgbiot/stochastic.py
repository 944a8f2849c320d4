"""Parametric (polynomial chaos) side of the stochastic Galerkin discretisation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import ScalarField, as_field


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """Total-degree index set, graded lexicographic order, zero index first."""

    M: int
    p: int
    indices: np.ndarray = field(repr=False)

    def __len__(self):
        return self.indices.shape[0]

    @property
    def n_y(self) -> int:
        return self.indices.shape[0]


def total_degree_set(M: int, p: int) -> MultiIndexSet:
    if M < 0 or p < 0:
        raise ValueError("M and p must be non-negative")
    rows = [()] if M == 0 else []
    if M > 0:
        for degree in range(p + 1):
            rows.extend(_compositions(degree, M))
    indices = np.array(rows, dtype=np.int64).reshape(len(rows), M)
    return MultiIndexSet(M, p, indices)


def _compositions(total, parts):
    """All ``parts``-tuples of non-negative ints summing to ``total``, lex descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def recurrence_coefficient(n):
    """Off-diagonal Jacobi coefficient ``b_n`` of orthonormal Legendre polynomials.

    ``t psi_n(t) = b_{n+1} psi_{n+1}(t) + b_n psi_{n-1}(t)`` under the uniform
    probability measure on [-1, 1].
    """
    n = np.asarray(n, dtype=float)
    return n / np.sqrt(4.0 * n * n - 1.0)


def legendre_orthonormal(degree: int, t):
    """Values of ``psi_0 .. psi_degree`` at ``t``; shape ``t.shape + (degree+1,)``.

    The polynomials are orthonormal with respect to the probability measure
    ``dt/2`` on [-1, 1].
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = t / recurrence_coefficient(1)
    for n in range(1, degree):
        b_next = recurrence_coefficient(n + 1)
        b_n = recurrence_coefficient(n)
        out[..., n + 1] = (t * out[..., n] - b_n * out[..., n - 1]) / b_next
    return out


def g_matrices(index_set: MultiIndexSet, half_widths) -> list:
    """``[G_0, G_1, ..., G_M]`` for parameters uniform on ``[-a_k, a_k]``."""
    half_widths = list(half_widths)
    if len(half_widths) != index_set.M:
        raise ValueError(
            f"need {index_set.M} parameter intervals, got {len(half_widths)}"
        )
    if any(a <= 0 for a in half_widths):
        raise ValueError("interval half-widths must be positive")
    idx = index_set.indices
    n_y = index_set.n_y
    lookup = {tuple(row): j for j, row in enumerate(idx)}
    mats = [sp.identity(n_y, format="csr")]
    for k, a in enumerate(half_widths):
        rows, cols, vals = [], [], []
        for i, alpha in enumerate(idx):
            beta = alpha.copy()
            beta[k] += 1
            j = lookup.get(tuple(beta))
            if j is None:
                continue
            v = a * float(recurrence_coefficient(alpha[k] + 1))
            rows += [i, j]
            cols += [j, i]
            vals += [v, v]
        G = sp.coo_matrix((vals, (rows, cols)), shape=(n_y, n_y)).tocsr()
        G.sort_indices()
        mats.append(G)
    return mats


def evaluate_basis(index_set: MultiIndexSet, half_widths, Y) -> np.ndarray:
    """``psi_alpha(Y)`` for every index; ``Y`` has shape ``(M,)`` or ``(N, M)``."""
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    a = np.asarray(half_widths, dtype=float)
    if Y.shape[1] != index_set.M:
        raise ValueError(f"parameter point must have {index_set.M} entries")
    if np.any(np.abs(Y) > a * (1 + 1e-12)):
        raise ValueError("parameter point outside the parameter box")
    t = Y / a
    vals = legendre_orthonormal(index_set.p, t)
    out = np.ones((Y.shape[0], index_set.n_y))
    for k in range(index_set.M):
        out *= vals[:, k, index_set.indices[:, k]]
    return out[0] if single else out


@dataclass(eq=False)
class RandomFieldExpansion:
    """Affine field ``mean(x) + sum_k modes[k](x) * Y_k`` with ``Y_k`` uniform on ``[-a_k, a_k]``."""

    mean: ScalarField
    modes: list = field(default_factory=list)
    half_widths: list = field(default_factory=list)

    def __post_init__(self):
        self.mean = as_field(self.mean)
        self.modes = [as_field(m) for m in self.modes]
        self.half_widths = [float(a) for a in self.half_widths]
        if len(self.half_widths) != len(self.modes):
            raise ValueError("one parameter interval per mode is required")
        if any(a <= 0 for a in self.half_widths):
            raise ValueError("interval half-widths must be positive")

    @property
    def M(self) -> int:
        return len(self.modes)

    def positivity_margin(self, x, y) -> float:
        """``min(mean) - sum_k a_k max|mode_k|`` over the sample points."""
        margin = float(np.min(self.mean(x, y)))
        for a, mode in zip(self.half_widths, self.modes):
            margin -= a * float(np.max(np.abs(mode(x, y))))
        return margin

    def sample(self, x, y, params):
        out = np.array(self.mean(x, y), dtype=float)
        for yk, mode in zip(params, self.modes):
            out = out + yk * mode(x, y)
        return out

    def deterministic(self) -> "RandomFieldExpansion":
        """Same mean, all mode fields replaced by zero (intervals kept)."""
        zeros = [ScalarField.constant(0.0) for _ in self.modes]
        return RandomFieldExpansion(self.mean, zeros, list(self.half_widths))


def binomial_count(M: int, p: int) -> int:
    return math.comb(M + p, p)
