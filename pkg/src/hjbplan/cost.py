"""Inventory holding-cost functions b(y) >= 0 and their grid sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Grid1D, MaskedGrid2D
from .errors import InvalidArgumentError, InvalidDataError
from .pde import ScalarField

KINDS = ("constant", "quadratic1d", "radial2d", "tabulated")

# codes used by the simulation kernels
_KIND_CODE = {"constant": 0, "quadratic1d": 1, "radial2d": 2, "tabulated": 3}


@dataclass(frozen=True)
class CostField:
    """Nonnegative holding cost, one of a few closed forms or a grid table."""

    kind: str
    c: float = 0.0
    table: ScalarField | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown cost kind {self.kind!r}")
        if self.kind == "constant" and self.c < 0:
            raise InvalidArgumentError(f"constant cost must be >= 0, got {self.c}")
        if self.kind == "tabulated":
            if self.table is None:
                raise InvalidArgumentError("tabulated cost needs a sampled field")
            if np.any(self.table.values < 0):
                raise InvalidDataError("tabulated cost contains negative samples")

    @classmethod
    def constant(cls, c: float) -> "CostField":
        return cls(kind="constant", c=float(c))

    @classmethod
    def quadratic_1d(cls) -> "CostField":
        """b(x) = x^2 on the interval."""
        return cls(kind="quadratic1d")

    @classmethod
    def radial_2d(cls) -> "CostField":
        """b(y) = y1^2 + y2^2."""
        return cls(kind="radial2d")

    @classmethod
    def tabulated(cls, table: ScalarField) -> "CostField":
        return cls(kind="tabulated", table=table)

    @property
    def dim(self) -> int | None:
        """Required point dimensionality, or None when any dimension works."""
        if self.kind == "constant":
            return None
        if self.kind == "quadratic1d":
            return 1
        if self.kind == "radial2d":
            return 2
        return self.table.grid.ndim


def eval_cost(field: CostField, point) -> float:
    """Evaluate b at one point (scalar for 1D, pair for 2D)."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    want = field.dim
    if want is not None and p.size != want:
        raise InvalidArgumentError(f"cost kind {field.kind!r} expects {want}D points, got {p.size}D")
    if field.kind == "constant":
        return field.c
    if field.kind == "quadratic1d":
        return float(p[0] ** 2)
    if field.kind == "radial2d":
        return float(p[0] ** 2 + p[1] ** 2)
    return _interp_table(field.table, p)


def _interp_table(table: ScalarField, p: np.ndarray) -> float:
    """Linear/bilinear table lookup; zero outside the table's rectangle."""
    grid = table.grid
    if isinstance(grid, Grid1D):
        x = float(p[0])
        nodes = grid.nodes
        if x < nodes[0] or x > nodes[-1]:
            return 0.0
        return float(np.interp(x, nodes, table.values))
    xs, ys = grid.x_axis, grid.y_axis
    x, y = float(p[0]), float(p[1])
    if x < xs[0] or x > xs[-1] or y < ys[0] or y > ys[-1]:
        return 0.0
    i = min(int((x - xs[0]) / grid.h), len(xs) - 2)
    j = min(int((y - ys[0]) / grid.h), len(ys) - 2)
    tx = (x - xs[i]) / grid.h
    ty = (y - ys[j]) / grid.h
    v = table.values
    return float(
        v[i, j] * (1 - tx) * (1 - ty)
        + v[i + 1, j] * tx * (1 - ty)
        + v[i, j + 1] * (1 - tx) * ty
        + v[i + 1, j + 1] * tx * ty
    )


def sample_on_grid(field: CostField, grid: Grid1D | MaskedGrid2D) -> ScalarField:
    """Sample b at every node; 2D nodes outside the mask carry zero."""
    if isinstance(grid, Grid1D):
        if field.dim not in (None, 1):
            raise InvalidArgumentError(f"cost kind {field.kind!r} is not one-dimensional")
        x = grid.nodes
        if field.kind == "constant":
            vals = np.full(grid.n, field.c)
        elif field.kind == "quadratic1d":
            vals = x**2
        else:
            vals = np.array([eval_cost(field, xi) for xi in x])
    else:
        if field.dim not in (None, 2):
            raise InvalidArgumentError(f"cost kind {field.kind!r} is not two-dimensional")
        X, Y = grid.meshgrid()
        if field.kind == "constant":
            vals = np.full(grid.shape, field.c)
        elif field.kind == "radial2d":
            vals = X**2 + Y**2
        else:
            vals = np.array(
                [[eval_cost(field, (X[i, j], Y[i, j])) for j in range(grid.shape[1])] for i in range(grid.shape[0])]
            )
        vals = np.where(grid.inside, vals, 0.0)
    if np.any(vals < 0):
        raise InvalidDataError("cost sampling produced negative values")
    return ScalarField(grid, vals)


def parse_cost(selector: str, grid: Grid1D | MaskedGrid2D | None = None) -> CostField:
    """Parse a CLI cost selector: const:<c>, x2, radial, or table:<path>.

    Table CSVs use the solver-output column layout: ``x,b`` for interval
    grids and ``y1,y2,b`` for masked grids, one row per node in grid order.
    """
    if selector.startswith("const:"):
        try:
            c = float(selector.split(":", 1)[1])
        except ValueError as exc:
            raise InvalidArgumentError(f"bad constant cost selector {selector!r}") from exc
        return CostField.constant(c)
    if selector == "x2":
        return CostField.quadratic_1d()
    if selector == "radial":
        return CostField.radial_2d()
    if selector.startswith("table:"):
        if grid is None:
            raise InvalidArgumentError("table costs need the target grid")
        path = selector.split(":", 1)[1]
        return CostField.tabulated(_load_table(path, grid))
    raise InvalidArgumentError(f"unknown cost selector {selector!r}")


def _load_table(path: str, grid: Grid1D | MaskedGrid2D) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if isinstance(grid, Grid1D):
        if data.shape != (grid.n, 2):
            raise InvalidDataError(f"expected {grid.n} rows of x,b in {path}, got shape {data.shape}")
        if not np.allclose(data[:, 0], grid.nodes, atol=1e-9):
            raise InvalidDataError(f"node coordinates in {path} do not match the grid")
        return ScalarField(grid, data[:, 1])
    nx, ny = grid.shape
    if data.shape != (nx * ny, 3):
        raise InvalidDataError(f"expected {nx * ny} rows of y1,y2,b in {path}, got shape {data.shape}")
    X, Y = grid.meshgrid()
    if not (np.allclose(data[:, 0], X.ravel(), atol=1e-9) and np.allclose(data[:, 1], Y.ravel(), atol=1e-9)):
        raise InvalidDataError(f"node coordinates in {path} do not match the grid")
    return ScalarField(grid, data[:, 2].reshape(nx, ny))
