"""Karhunen-Loeve modes of the separable exponential covariance kernel.

The 1D kernel ``exp(-|s - t| / L)`` on ``[-a, a]`` has eigenpairs

    lambda_n = 2c / (w_n**2 + c**2),  c = 1/L,

with ``cos(w x)`` modes where ``c cos(w a) = w sin(w a)`` and ``sin(w x)`` modes
where ``w cos(w a) = -c sin(w a)``. The n-th root (counting both families)
lies in ``((n-1) pi / 2a, n pi / 2a)`` so the families alternate, even first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .assembly import ScalarField
from .mesh import RectDomain


class KLRootError(RuntimeError):
    pass


@dataclass(frozen=True)
class Eigenpair1D:
    value: float
    omega: float
    even: bool
    half_length: float
    center: float
    norm: float
    sign: float

    def __call__(self, s):
        t = np.asarray(s, dtype=float) - self.center
        base = np.cos(self.omega * t) if self.even else np.sin(self.omega * t)
        return self.sign * base / self.norm


def eigenpairs_1d(half_length: float, correlation_length: float, n: int,
                  center: float = 0.0) -> list[Eigenpair1D]:
    """Leading ``n`` eigenpairs on ``[center - a, center + a]``, eigenvalue descending.

    Eigenfunctions are L2-normalised and signed so that they are positive at the
    left end of the interval.
    """
    a = float(half_length)
    c = 1.0 / float(correlation_length)

    def even_eq(w):
        return c * np.cos(w * a) - w * np.sin(w * a)

    def odd_eq(w):
        return w * np.cos(w * a) + c * np.sin(w * a)

    pairs = []
    for k in range(1, n + 1):
        lo = (k - 1) * np.pi / (2 * a)
        hi = k * np.pi / (2 * a)
        even = k % 2 == 1
        eq = even_eq if even else odd_eq
        f_lo, f_hi = eq(lo), eq(hi)
        if not f_lo * f_hi < 0:
            raise KLRootError(f"root {k} not bracketed in [{lo}, {hi}]")
        w = brentq(eq, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        if even:
            norm = np.sqrt(a + np.sin(2 * w * a) / (2 * w))
            left = np.cos(w * a)
        else:
            norm = np.sqrt(a - np.sin(2 * w * a) / (2 * w))
            left = -np.sin(w * a)
        pairs.append(
            Eigenpair1D(
                value=2 * c / (w * w + c * c),
                omega=float(w),
                even=even,
                half_length=a,
                center=float(center),
                norm=float(norm),
                sign=float(np.sign(left)),
            )
        )
    return pairs


@dataclass(frozen=True)
class Eigenpair2D:
    value: float
    first: Eigenpair1D
    second: Eigenpair1D
    index: tuple[int, int]

    def __call__(self, x, y):
        return self.first(x) * self.second(y)


def eigenpairs_2d(domain: RectDomain, correlation_length: float, M: int) -> list[Eigenpair2D]:
    """Leading ``M`` products of 1D eigenpairs, ties broken by (x index, y index)."""
    cx, cy = domain.center
    ex = eigenpairs_1d(0.5 * domain.width, correlation_length, M, cx)
    ey = eigenpairs_1d(0.5 * domain.height, correlation_length, M, cy)
    cand = [
        (px.value * py.value, i, j)
        for i, px in enumerate(ex)
        for j, py in enumerate(ey)
    ]
    cand.sort(key=lambda t: (-t[0], t[1], t[2]))
    return [Eigenpair2D(v, ex[i], ey[j], (i, j)) for v, i, j in cand[:M]]


def kl_modes(correlation_length: float, sigma: float, domain: RectDomain, M: int) -> list:
    """Mode fields ``sigma * sqrt(lambda_m) * phi_m(x)`` for ``m = 1..M``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    modes = []
    for pair in eigenpairs_2d(domain, correlation_length, M):
        scale = sigma * np.sqrt(pair.value)

        def func(x, y, pair=pair, scale=scale):
            return scale * pair(x, y)

        modes.append(ScalarField(func, tag="kl-mode"))
    return modes
