"""Euler-Maruyama simulation of the controlled inventory SDE with stopping.

The state follows y_{k+1} = y_k + p(y_k) dt + sigma sqrt(dt) xi_k with the
stopping predicate evaluated on y_k before every step (2D: the state left the
ball of the sampled stopping radius around the reference point; 1D: the state
left the open interval).  Running cost accrues by the left-endpoint rule,
(|p(y_k)|^2 + b(y_k)) dt per executed step.

Randomness: numpy PCG64 seeded per path, standard normals drawn in fixed
chunks of NOISE_CHUNK steps and consumed sequentially.  Given the seed and
configuration, trajectories are bit-identical regardless of thread count.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .cost import CostField, _KIND_CODE
from .domain import Grid1D, MaskedGrid2D, stopping_radius
from .errors import InvalidArgumentError
from .pde import ScalarField
from .transform import ControlField, interp_scalar

NOISE_CHUNK = 4096
RNG_IDENTITY = f"numpy.random.PCG64/standard_normal/chunk{NOISE_CHUNK}"
MAX_STORED_DEFAULT = 1_000_000

HIT_BOUNDARY = "hit_boundary"
HORIZON_REACHED = "horizon_reached"

_EMPTY = np.zeros(1)
_EMPTY2 = np.zeros((1, 1))


@dataclass(frozen=True)
class SimConfig:
    """Time step, horizon, RNG seed, initial state and reference point."""

    dt: float
    t_max: float
    seed: int
    start: tuple[float, ...]
    x0: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.t_max < self.dt:
            raise InvalidArgumentError(f"t_max must be >= dt, got t_max={self.t_max}, dt={self.dt}")
        start = np.atleast_1d(np.asarray(self.start, dtype=float))
        object.__setattr__(self, "start", tuple(start.tolist()))
        if self.x0 is not None:
            x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
            object.__setattr__(self, "x0", tuple(x0.tolist()))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    costs: np.ndarray
    accrued_cost: float
    stop_reason: str
    stop_time: float
    stride: int
    seed: int
    dt: float


@dataclass(frozen=True)
class MCReport:
    mean: float
    std_error: float
    n: int
    mean_stop_time: float
    fraction_stopped: float


@njit(cache=True, nogil=True)
def _chunk_1d(y, cost, k_start, noise, dt, sigma, length,
              x0g, h, npts, pvals,
              ck, cc, ctx0, cth, ctn, ctv,
              states, costs, stride, store):
    sq = sigma * math.sqrt(dt)
    k = k_start
    for m in range(noise.shape[0]):
        k = k_start + m
        if store and k % stride == 0:
            states[k // stride] = y
            costs[k // stride] = cost
        if not (0.0 < y < length):
            return y, cost, k, 1
        if y < x0g or y > x0g + (npts - 1) * h:
            p = 0.0
        else:
            f = (y - x0g) / h
            idx = int(f)
            if idx >= npts - 1:
                idx = npts - 2
            w = f - idx
            p = pvals[idx] * (1.0 - w) + pvals[idx + 1] * w
        if ck == 0:
            bv = cc
        elif ck == 1:
            bv = y * y
        else:
            if y < ctx0 or y > ctx0 + (ctn - 1) * cth:
                bv = 0.0
            else:
                f = (y - ctx0) / cth
                idx = int(f)
                if idx >= ctn - 1:
                    idx = ctn - 2
                w = f - idx
                bv = ctv[idx] * (1.0 - w) + ctv[idx + 1] * w
        cost += (p * p + bv) * dt
        y = y + p * dt + sq * noise[m]
    return y, cost, k + 1, 0


@njit(cache=True, nogil=True)
def _bilinear(x, yv, x0g, y0g, h, nx, ny, vals):
    if x < x0g or x > x0g + (nx - 1) * h or yv < y0g or yv > y0g + (ny - 1) * h:
        return 0.0
    fx = (x - x0g) / h
    fy = (yv - y0g) / h
    i = int(fx)
    j = int(fy)
    if i >= nx - 1:
        i = nx - 2
    if j >= ny - 1:
        j = ny - 2
    tx = fx - i
    ty = fy - j
    return (vals[i, j] * (1.0 - tx) * (1.0 - ty)
            + vals[i + 1, j] * tx * (1.0 - ty)
            + vals[i, j + 1] * (1.0 - tx) * ty
            + vals[i + 1, j + 1] * tx * ty)


@njit(cache=True, nogil=True)
def _chunk_2d(y1, y2, cost, k_start, noise, dt, sigma,
              cx, cy, r2,
              x0g, y0g, h, nx, ny, p1, p2,
              ck, cc, ctx0, cty0, cth, ctnx, ctny, ctv,
              states, costs, stride, store):
    sq = sigma * math.sqrt(dt)
    k = k_start
    for m in range(noise.shape[0]):
        k = k_start + m
        if store and k % stride == 0:
            states[k // stride, 0] = y1
            states[k // stride, 1] = y2
            costs[k // stride] = cost
        dx = y1 - cx
        dy = y2 - cy
        if dx * dx + dy * dy > r2:
            return y1, y2, cost, k, 1
        pa = _bilinear(y1, y2, x0g, y0g, h, nx, ny, p1)
        pb = _bilinear(y1, y2, x0g, y0g, h, nx, ny, p2)
        if ck == 0:
            bv = cc
        elif ck == 2:
            bv = y1 * y1 + y2 * y2
        else:
            bv = _bilinear(y1, y2, ctx0, cty0, cth, ctnx, ctny, ctv)
        cost += (pa * pa + pb * pb + bv) * dt
        y1 = y1 + pa * dt + sq * noise[m, 0]
        y2 = y2 + pb * dt + sq * noise[m, 1]
    return y1, y2, cost, k + 1, 0


def _cost_kernel_params(b: CostField, ndim: int):
    code = _KIND_CODE[b.kind]
    if b.kind == "constant":
        return code, b.c, 0.0, 0.0, 0.0, 2, 2, _EMPTY, _EMPTY2
    if b.kind in ("quadratic1d", "radial2d"):
        if b.dim != ndim:
            raise InvalidArgumentError(f"cost kind {b.kind!r} does not match a {ndim}D simulation")
        return code, 0.0, 0.0, 0.0, 0.0, 2, 2, _EMPTY, _EMPTY2
    table = b.table
    if table.grid.ndim != ndim:
        raise InvalidArgumentError("tabulated cost grid dimension does not match the simulation")
    if ndim == 1:
        g = table.grid
        return code, 0.0, float(g.nodes[0]), 0.0, g.h, g.n, 2, table.values, _EMPTY2
    g = table.grid
    return (code, 0.0, float(g.x_axis[0]), float(g.y_axis[0]), g.h,
            len(g.x_axis), len(g.y_axis), _EMPTY, table.values)


def _require_domain_grid(p: ControlField, grid) -> None:
    if grid is None or p.grid is not grid and p.grid.shape != grid.shape:
        raise InvalidArgumentError("control field grid does not match the simulation domain")


def _run_path(p: ControlField, grid, b: CostField, sigma: float, cfg: SimConfig,
              seed: int, store: bool, max_stored: int, radius: float | None):
    """Drive one path through the chunked kernel.

    Returns (times, states, costs, final_cost, stop_reason, stop_time, stride)
    with the array outputs None when store is False.
    """
    n_total = int(round(cfg.t_max / cfg.dt))
    if n_total < 1:
        raise InvalidArgumentError("horizon shorter than one step")
    stride = 1 if n_total + 1 <= max_stored else -(-(n_total + 1) // max_stored)
    rng = np.random.Generator(np.random.PCG64(seed))
    ndim = 1 if isinstance(grid, Grid1D) else 2
    ck, cc, ctx0, cty0, cth, ctnx, ctny, ctv1, ctv2 = _cost_kernel_params(b, ndim)

    if store:
        n_slots = n_total // stride + 2
        states = np.empty(n_slots) if ndim == 1 else np.empty((n_slots, 2))
        costs = np.empty(n_slots)
    else:
        states = _EMPTY if ndim == 1 else np.zeros((1, 2))
        costs = _EMPTY.copy()

    cost = 0.0
    k = 0
    status = 0
    if ndim == 1:
        y = float(cfg.start[0])
        while status == 0 and k < n_total:
            m = min(NOISE_CHUNK, n_total - k)
            noise = rng.standard_normal(m)
            y, cost, k, status = _chunk_1d(
                y, cost, k, noise, cfg.dt, sigma, grid.length,
                float(grid.nodes[0]), grid.h, grid.n, p.components[0],
                ck, cc, ctx0, cth, ctnx, ctv1,
                states, costs, stride, store,
            )
        final_state = y
    else:
        y1, y2 = float(cfg.start[0]), float(cfg.start[1])
        cx, cy = cfg.x0
        r2 = radius * radius
        while status == 0 and k < n_total:
            m = min(NOISE_CHUNK, n_total - k)
            noise = rng.standard_normal((m, 2))
            y1, y2, cost, k, status = _chunk_2d(
                y1, y2, cost, k, noise, cfg.dt, sigma,
                cx, cy, r2,
                float(grid.x_axis[0]), float(grid.y_axis[0]), grid.h,
                len(grid.x_axis), len(grid.y_axis), p.components[0], p.components[1],
                ck, cc, ctx0, cty0, cth, ctnx, ctny, ctv2,
                states, costs, stride, store,
            )
        final_state = np.array([y1, y2])

    if status == 1:
        stop_reason, k_end = HIT_BOUNDARY, k
    else:
        stop_reason, k_end = HORIZON_REACHED, n_total
    stop_time = k_end * cfg.dt

    if not store:
        return None, None, None, cost, stop_reason, stop_time, stride, final_state

    pos = k_end // stride if k_end % stride == 0 else k_end // stride + 1
    states[pos] = final_state
    costs[pos] = cost
    ks = np.arange(pos + 1) * stride
    ks[-1] = k_end
    return (ks * cfg.dt, states[: pos + 1].copy(), costs[: pos + 1].copy(),
            cost, stop_reason, stop_time, stride, final_state)


def _validate_start(grid, cfg: SimConfig, radius: float | None) -> None:
    if isinstance(grid, Grid1D):
        if len(cfg.start) != 1:
            raise InvalidArgumentError("1D simulation needs a scalar start state")
        if not (0.0 < cfg.start[0] < grid.length):
            raise InvalidArgumentError(f"start {cfg.start[0]} is outside the open interval (0, {grid.length})")
    else:
        if len(cfg.start) != 2:
            raise InvalidArgumentError("2D simulation needs a 2-vector start state")
        if cfg.x0 is None:
            raise InvalidArgumentError("2D simulation needs the reference point x0")
        d = math.dist(cfg.start, cfg.x0)
        if d > radius:
            raise InvalidArgumentError(
                f"start at distance {d:.6g} from x0 is outside the stopping radius {radius:.6g}"
            )


def simulate(p: ControlField, grid: Grid1D | MaskedGrid2D, b: CostField, sigma: float,
             cfg: SimConfig, num_boundary_samples: int = 1000,
             max_stored: int = MAX_STORED_DEFAULT) -> Trajectory:
    """Simulate one controlled path until it exits or the horizon is reached.

    Paths longer than max_stored steps are stored with a uniform stride (the
    final state is always kept); the accrued cost is exact regardless.
    """
    _require_domain_grid(p, grid)
    radius = None
    if isinstance(grid, MaskedGrid2D):
        if cfg.x0 is None:
            raise InvalidArgumentError("2D simulation needs the reference point x0")
        radius = stopping_radius(cfg.x0, grid.spec, num_boundary_samples)
    _validate_start(grid, cfg, radius)
    times, states, costs, cost, reason, stop_time, stride, _ = _run_path(
        p, grid, b, sigma, cfg, cfg.seed, True, max_stored, radius
    )
    return Trajectory(times=times, states=states, costs=costs, accrued_cost=cost,
                      stop_reason=reason, stop_time=stop_time, stride=stride,
                      seed=cfg.seed, dt=cfg.dt)


def _thread_count() -> int:
    raw = os.environ.get("HJB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def monte_carlo_cost(p: ControlField, grid: Grid1D | MaskedGrid2D, b: CostField,
                     sigma: float, cfg: SimConfig, n_paths: int, terminal_value: float,
                     continuation: ScalarField | None = None,
                     num_boundary_samples: int = 1000) -> MCReport:
    """Sample mean of accrued cost plus terminal value over seeded paths.

    Paths use seeds cfg.seed, cfg.seed+1, ...  Stopped paths add
    terminal_value; horizon-truncated paths add the continuation field
    interpolated at the final state (or terminal_value when no continuation
    field is supplied).  Paths may execute on HJB_THREADS threads; results
    are combined in seed order so the report does not depend on the thread
    count.
    """
    if n_paths < 2:
        raise InvalidArgumentError(f"need at least 2 paths, got {n_paths}")
    _require_domain_grid(p, grid)
    radius = None
    if isinstance(grid, MaskedGrid2D):
        if cfg.x0 is None:
            raise InvalidArgumentError("2D simulation needs the reference point x0")
        radius = stopping_radius(cfg.x0, grid.spec, num_boundary_samples)
    _validate_start(grid, cfg, radius)

    def one(i: int):
        _, _, _, cost, reason, stop_time, _, final_state = _run_path(
            p, grid, b, sigma, cfg, cfg.seed + i, False, MAX_STORED_DEFAULT, radius
        )
        if reason == HIT_BOUNDARY or continuation is None:
            total = cost + terminal_value
        else:
            total = cost + interp_scalar(continuation, final_state)
        return total, stop_time, reason == HIT_BOUNDARY

    threads = _thread_count()
    if threads == 1:
        results = [one(i) for i in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_paths)))

    totals = np.array([r[0] for r in results])
    stop_times = np.array([r[1] for r in results])
    stopped = np.array([r[2] for r in results])
    return MCReport(
        mean=float(totals.mean()),
        std_error=float(totals.std(ddof=1) / math.sqrt(n_paths)),
        n=n_paths,
        mean_stop_time=float(stop_times.mean()),
        fraction_stopped=float(stopped.mean()),
    )


def write_trajectory_csv(traj: Trajectory, path: str) -> str:
    """Write the stored path as CSV plus a JSON metadata sidecar.

    Returns the sidecar path.  Floats carry 17 significant digits so files
    round-trip bit-exactly.
    """
    ndim = 1 if traj.states.ndim == 1 else traj.states.shape[1]
    header = "t,y1,cost" if ndim == 1 else "t,y1,y2,cost"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for idx in range(len(traj.times)):
            if ndim == 1:
                row = (traj.times[idx], traj.states[idx], traj.costs[idx])
            else:
                row = (traj.times[idx], traj.states[idx, 0], traj.states[idx, 1], traj.costs[idx])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    meta = {
        "seed": traj.seed,
        "dt": traj.dt,
        "stop_reason": traj.stop_reason,
        "stop_time": traj.stop_time,
        "stride": traj.stride,
        "rows": int(len(traj.times)),
        "accrued_cost": traj.accrued_cost,
        "rng": RNG_IDENTITY,
    }
    sidecar = f"{path}.meta.json"
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
