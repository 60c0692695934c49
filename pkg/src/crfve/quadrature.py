"""Quadrature on triangles (barycentric) and on straight segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi


def _perm3(a: float, b: float) -> np.ndarray:
    return np.array([[a, b, b], [b, a, b], [b, b, a]])


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points ``(q, 3)`` and weights summing to one."""
    if degree <= 1:
        return np.full((1, 3), 1.0 / 3.0), np.ones(1)
    if degree == 2:
        # interior points only: coefficients are never sampled on an edge
        return _perm3(2.0 / 3.0, 1.0 / 6.0), np.full(3, 1.0 / 3.0)
    if degree in (3, 4, 5):
        s = np.sqrt(15.0)
        a1, a2 = (6.0 - s) / 21.0, (6.0 + s) / 21.0
        pts = np.vstack([np.full((1, 3), 1.0 / 3.0),
                         _perm3(1.0 - 2.0 * a1, a1),
                         _perm3(1.0 - 2.0 * a2, a2)])
        w = np.concatenate([[9.0 / 40.0],
                            np.full(3, (155.0 - s) / 1200.0),
                            np.full(3, (155.0 + s) / 1200.0)])
        return pts, w
    return conical_rule(degree)


def conical_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) product rule exact to ``degree``.

    Gauss-Jacobi(1, 0) in the collapsed direction times Gauss-Legendre.
    """
    npts = degree // 2 + 1
    a, wa = roots_jacobi(npts, 1.0, 0.0)       # weight (1 - a) on [-1, 1]
    b, wb = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (a + 1.0)                        # collapsed coordinate in [0, 1]
    t = 0.5 * (b + 1.0)
    S, T = np.meshgrid(s, t, indexing="ij")
    l1 = S.ravel()
    l2 = ((1.0 - S) * T).ravel()
    pts = np.column_stack([1.0 - l1 - l2, l1, l2])
    w = np.outer(wa, wb).ravel()
    return pts, w / w.sum()


def segment_rule(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points on ``[0, 1]`` and weights summing to one."""
    if npoints < 1:
        raise ValueError("need at least one point")
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class QuadratureRule:
    """Triangle rule of a given degree plus an ``n``-point Gauss segment rule.

    The defaults are exact for quadratics on triangles and cubics on segments.
    """

    triangle_degree: int = 2
    segment_points: int = 2

    @property
    def triangle(self) -> tuple[np.ndarray, np.ndarray]:
        return triangle_rule(self.triangle_degree)

    @property
    def segment(self) -> tuple[np.ndarray, np.ndarray]:
        return segment_rule(self.segment_points)
