"""Computational domains: 1D interval grids and masked elliptical 2D grids.

The 2D domain is a uniform lattice over the bounding rectangle of an ellipse.
Nodes are classified by the strict inside test (y1/a)^2 + (y2/b)^2 < 1; the
discrete boundary is the layer of inside nodes with at least one of their four
axis neighbours outside.  That layer carries the Dirichlet value in the
solvers, standing in for the continuous boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, length] with n nodes, spacing h = length/(n-1)."""

    n: int
    length: float
    h: float
    nodes: np.ndarray

    @property
    def ndim(self) -> int:
        return 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)


@dataclass(frozen=True)
class EllipseSpec:
    """Ellipse semi-axes: a along y1, b along y2."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidArgumentError(f"semi-axes must be positive, got a={self.a}, b={self.b}")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return float((p[0] / self.a) ** 2 + (p[1] / self.b) ** 2) < 1.0


@dataclass(frozen=True)
class MaskedGrid2D:
    """Uniform lattice over the ellipse's bounding rectangle with node masks.

    ``inside`` marks nodes strictly inside the ellipse, ``boundary`` the inside
    nodes with an outside 4-neighbour, and ``interior = inside & ~boundary``.
    Arrays are indexed [i, j] with i along y1 (x_axis) and j along y2 (y_axis).
    """

    spec: EllipseSpec
    h: float
    x_axis: np.ndarray
    y_axis: np.ndarray
    inside: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.x_axis), len(self.y_axis))

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_axis, self.y_axis, indexing="ij")


def build_interval_grid(n: int, length: float) -> Grid1D:
    """Uniform 1D grid with n >= 3 nodes spanning [0, length]."""
    if n < 3:
        raise InvalidArgumentError(f"need at least 3 nodes, got n={n}")
    if not length > 0:
        raise InvalidArgumentError(f"length must be positive, got {length}")
    nodes = np.linspace(0.0, length, n)
    return Grid1D(n=n, length=float(length), h=float(length) / (n - 1), nodes=_readonly(nodes))


def classify_ellipse_nodes(spec: EllipseSpec, x_axis: np.ndarray, y_axis: np.ndarray):
    """Classify lattice nodes against the ellipse.

    Returns (inside, boundary) boolean arrays.  A node is inside iff the
    strict inequality holds; it is boundary iff it is inside and at least one
    of its four axis neighbours (nodes off the rectangle count as outside)
    is not inside.
    """
    X, Y = np.meshgrid(x_axis, y_axis, indexing="ij")
    inside = (X / spec.a) ** 2 + (Y / spec.b) ** 2 < 1.0
    padded = np.zeros((inside.shape[0] + 2, inside.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = inside
    all_neighbors_inside = (
        padded[2:, 1:-1] & padded[:-2, 1:-1] & padded[1:-1, 2:] & padded[1:-1, :-2]
    )
    boundary = inside & ~all_neighbors_inside
    return inside, boundary


def build_masked_grid(spec: EllipseSpec, h: float) -> MaskedGrid2D:
    """Build the masked lattice of spacing h over [-a, a] x [-b, b].

    Axes are exact integer multiples of h centred on the origin, so the
    origin is always a node and, when h divides the semi-axes, the rectangle
    edges land exactly on +-a and +-b (where the strict test classifies them
    outside).
    """
    if not h > 0:
        raise InvalidArgumentError(f"spacing must be positive, got h={h}")
    if h >= min(spec.a, spec.b):
        raise InvalidArgumentError(
            f"spacing h={h} leaves no interior nodes inside ellipse a={spec.a}, b={spec.b}"
        )
    mx = int(np.floor(spec.a / h + 1e-9))
    my = int(np.floor(spec.b / h + 1e-9))
    x_axis = h * np.arange(-mx, mx + 1)
    y_axis = h * np.arange(-my, my + 1)
    inside, boundary = classify_ellipse_nodes(spec, x_axis, y_axis)
    return MaskedGrid2D(
        spec=spec,
        h=float(h),
        x_axis=_readonly(x_axis),
        y_axis=_readonly(y_axis),
        inside=_readonly(inside),
        boundary=_readonly(boundary),
        interior=_readonly(inside & ~boundary),
    )


def ellipse_boundary_point(spec: EllipseSpec, theta: float | np.ndarray) -> np.ndarray:
    """Boundary point along direction theta: t*(cos t, sin t) on the ellipse."""
    t = 1.0 / np.sqrt((np.cos(theta) / spec.a) ** 2 + (np.sin(theta) / spec.b) ** 2)
    return np.stack([t * np.cos(theta), t * np.sin(theta)], axis=-1)


def stopping_radius(x0, spec: EllipseSpec, num_points: int = 1000) -> float:
    """Sampled distance from x0 to the ellipse boundary.

    Minimises ||boundary(theta) - x0|| over num_points angles theta in
    [0, 2*pi).  This is the sampled minimum used by the stopping rule; it
    upper-bounds the true distance at sample resolution.
    """
    x0 = np.asarray(x0, dtype=float)
    if num_points < 8:
        raise InvalidArgumentError(f"num_points must be >= 8, got {num_points}")
    if not spec.contains(x0):
        raise InvalidArgumentError(f"reference point {x0.tolist()} is not strictly inside the ellipse")
    thetas = np.linspace(0.0, 2.0 * np.pi, num_points, endpoint=False)
    pts = ellipse_boundary_point(spec, thetas)
    return float(np.min(np.linalg.norm(pts - x0, axis=-1)))
