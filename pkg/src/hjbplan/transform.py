"""Value function, gradients and the optimal feedback control field.

The value function is z = -2 sigma^2 ln(u).  Gradients are taken over the
full grid rectangle with numpy's second-order scheme (central differences
inside, one-sided at the rectangle edges), ignoring the ellipse mask; near
the mask the outside nodes hold the boundary constant, so control values in
that layer are scheme-defined rather than PDE-defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domain import Grid1D, MaskedGrid2D
from .errors import InvalidArgumentError, InvalidDataError
from .pde import ScalarField


@dataclass(frozen=True)
class ControlField:
    """Per-node control vector with linear interpolation for off-node queries.

    Queries outside the grid rectangle return the zero vector.
    """

    grid: Grid1D | MaskedGrid2D
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        comps = []
        for comp in self.components:
            c = np.ascontiguousarray(np.asarray(comp, dtype=float))
            if c.shape != self.grid.shape:
                raise InvalidArgumentError(
                    f"component shape {c.shape} does not match grid shape {self.grid.shape}"
                )
            if not np.all(np.isfinite(c)):
                raise InvalidDataError("control component contains non-finite values")
            c.setflags(write=False)
            comps.append(c)
        if len(comps) != self.grid.ndim:
            raise InvalidArgumentError(f"expected {self.grid.ndim} components, got {len(comps)}")
        object.__setattr__(self, "components", tuple(comps))

    @property
    def dim(self) -> int:
        return self.grid.ndim


def value_function(u: ScalarField, sigma: float) -> ScalarField:
    """z = -2 sigma^2 ln(u), node-wise over the stored rectangle."""
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    grid = u.grid
    vals = u.values
    inside_vals = vals if isinstance(grid, Grid1D) else vals[grid.inside]
    if np.any(inside_vals <= 0):
        raise InvalidDataError("nonpositive u inside the domain; cannot take the log transform")
    return ScalarField(grid, -2.0 * sigma**2 * np.log(vals))


def gradient(f: ScalarField) -> tuple[np.ndarray, ...]:
    """Finite-difference gradient over the full rectangle, one array per axis.

    Central differences at nodes with two same-axis neighbours, second-order
    one-sided differences on the rectangle edges (numpy edge_order=2).
    """
    grid = f.grid
    if min(grid.shape) < 3:
        raise InvalidArgumentError("gradient needs at least 3 nodes along every axis")
    if isinstance(grid, Grid1D):
        return (np.gradient(f.values, grid.h, edge_order=2),)
    gx, gy = np.gradient(f.values, grid.h, grid.h, edge_order=2)
    return (gx, gy)


def optimal_control(z: ScalarField) -> ControlField:
    """Feedback control p* = -1/2 grad z."""
    return ControlField(z.grid, tuple(-0.5 * g for g in gradient(z)))


def _as_points(point, dim: int) -> tuple[np.ndarray, bool]:
    p = np.asarray(point, dtype=float)
    if p.ndim == 0 and dim == 1:
        return p.reshape(1, 1), True
    if p.ndim == 1:
        if dim == 1:
            # a length-1 vector is one point, anything longer is a batch
            return p.reshape(-1, 1), p.size == 1
        if p.size == dim:
            return p.reshape(1, dim), True
        raise InvalidArgumentError(f"expected point of dimension {dim}, got {p.size}")
    if p.ndim == 2 and p.shape[1] == dim:
        return p, False
    raise InvalidArgumentError(f"cannot interpret points of shape {p.shape} for dimension {dim}")


def query_control(p: ControlField, point) -> np.ndarray:
    """Interpolated control at one point or a batch of points.

    Piecewise-linear in 1D, bilinear in 2D; zero vector outside the grid
    rectangle.  Returns shape (dim,) for a single point, (m, dim) for m points.
    """
    grid = p.grid
    pts, single = _as_points(point, grid.ndim)
    if isinstance(grid, Grid1D):
        x = pts[:, 0]
        out = np.interp(x, grid.nodes, p.components[0])
        out = np.where((x < grid.nodes[0]) | (x > grid.nodes[-1]), 0.0, out)
        result = out.reshape(-1, 1)
    else:
        cols = []
        for comp in p.components:
            interp = RegularGridInterpolator(
                (grid.x_axis, grid.y_axis), comp, method="linear",
                bounds_error=False, fill_value=0.0,
            )
            cols.append(interp(pts))
        result = np.stack(cols, axis=-1)
    return result[0] if single else result


def interp_scalar(f: ScalarField, point, clip: bool = True) -> float | np.ndarray:
    """Linear interpolation of a scalar field; clips points into the rectangle.

    Used for continuation values at simulation end states, which may sit one
    step outside the rectangle.
    """
    grid = f.grid
    pts, single = _as_points(point, grid.ndim)
    if isinstance(grid, Grid1D):
        x = np.clip(pts[:, 0], grid.nodes[0], grid.nodes[-1]) if clip else pts[:, 0]
        out = np.interp(x, grid.nodes, f.values)
    else:
        if clip:
            pts = np.column_stack([
                np.clip(pts[:, 0], grid.x_axis[0], grid.x_axis[-1]),
                np.clip(pts[:, 1], grid.y_axis[0], grid.y_axis[-1]),
            ])
        interp = RegularGridInterpolator(
            (grid.x_axis, grid.y_axis), f.values, method="linear",
            bounds_error=False, fill_value=float(f.values[0, 0]),
        )
        out = interp(pts)
    return float(out[0]) if single else out
