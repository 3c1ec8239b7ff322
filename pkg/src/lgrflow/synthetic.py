"""Analytic benchmark flows, an RK4 trajectory advector and a dense FTLE oracle.

Velocity functions take positions of shape ``(..., 2)`` and a scalar time and
return velocities of the same shape; gradient functions return ``(..., 2, 2)``
with ``grad[..., i, j] = d v_i / d x_j``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import LGRError
from .trajectories import TrajectorySet

__all__ = [
    "AnalyticFlow",
    "GridSpec",
    "OracleField",
    "rigid_rotation",
    "saddle",
    "shear",
    "double_gyre",
    "scaled",
    "FLOWS",
    "make_flow",
    "advect",
    "dense_ftle_oracle",
    "apply_euclidean_motion",
    "random_seeds",
]


@dataclass(frozen=True)
class AnalyticFlow:
    name: str
    velocity: Callable[[np.ndarray, float], np.ndarray]
    gradient: Callable[[np.ndarray, float], np.ndarray]
    params: dict = field(default_factory=dict)
    domain: tuple[tuple[float, float], tuple[float, float]] = ((-1.0, 1.0), (-1.0, 1.0))


def _linear(name: str, a: np.ndarray, params: dict) -> AnalyticFlow:
    a = np.asarray(a, dtype=float)

    def velocity(p, t):
        return np.asarray(p, dtype=float) @ a.T

    def gradient(p, t):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(a, p.shape[:-1] + (2, 2)).copy()

    return AnalyticFlow(name, velocity, gradient, params)


def rigid_rotation(omega: float = 1.0) -> AnalyticFlow:
    """Solid-body rotation ``v = omega (-y, x)``; vorticity ``2 omega``."""
    return _linear("rigid_rotation", [[0.0, -omega], [omega, 0.0]], {"omega": omega})


def saddle(lam: float = 1.0) -> AnalyticFlow:
    """Hyperbolic point ``v = lam (x, -y)``."""
    return _linear("saddle", [[lam, 0.0], [0.0, -lam]], {"lam": lam})


def shear(rate: float = 1.0) -> AnalyticFlow:
    """Simple shear ``v = (rate y, 0)``."""
    return _linear("shear", [[0.0, rate], [0.0, 0.0]], {"rate": rate})


def double_gyre(A: float = 0.1, eps: float = 0.25, omega: float = math.pi / 5) -> AnalyticFlow:
    """Time-periodic double gyre on ``[0, 2] x [0, 1]``."""
    pi = math.pi

    def parts(p, t):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        a = eps * math.sin(omega * t)
        b = 1.0 - 2.0 * a
        f = a * x * x + b * x
        df = 2.0 * a * x + b
        return x, y, a, f, df

    def velocity(p, t):
        x, y, a, f, df = parts(p, t)
        u = -pi * A * np.sin(pi * f) * np.cos(pi * y)
        v = pi * A * np.cos(pi * f) * np.sin(pi * y) * df
        return np.stack([u, v], axis=-1)

    def gradient(p, t):
        x, y, a, f, df = parts(p, t)
        sf, cf = np.sin(pi * f), np.cos(pi * f)
        sy, cy = np.sin(pi * y), np.cos(pi * y)
        g = np.empty(np.shape(x) + (2, 2))
        g[..., 0, 0] = -pi * pi * A * cf * cy * df
        g[..., 0, 1] = pi * pi * A * sf * sy
        g[..., 1, 0] = pi * A * sy * (-pi * sf * df * df + cf * 2.0 * a)
        g[..., 1, 1] = pi * pi * A * cf * cy * df
        return g

    return AnalyticFlow("double_gyre", velocity, gradient, {"A": A, "eps": eps, "omega": omega},
                        domain=((0.0, 2.0), (0.0, 1.0)))


def scaled(flow: AnalyticFlow, length: float, time: float) -> AnalyticFlow:
    """Rescale a flow to new length and time units: ``x -> length x``, ``t -> time t``."""
    def velocity(p, t):
        return flow.velocity(np.asarray(p, dtype=float) / length, t / time) * (length / time)

    def gradient(p, t):
        return flow.gradient(np.asarray(p, dtype=float) / length, t / time) / time

    (x0, x1), (y0, y1) = flow.domain
    params = dict(flow.params, length=length, time=time)
    return AnalyticFlow(flow.name, velocity, gradient, params,
                        domain=((x0 * length, x1 * length), (y0 * length, y1 * length)))


FLOWS: dict[str, Callable[..., AnalyticFlow]] = {
    "rigid_rotation": rigid_rotation,
    "saddle": saddle,
    "shear": shear,
    "double_gyre": double_gyre,
}


def make_flow(name: str, **params) -> AnalyticFlow:
    try:
        factory = FLOWS[name]
    except KeyError:
        raise ValueError(f"unknown flow {name!r}; choose from {sorted(FLOWS)}") from None
    return factory(**params)


def random_seeds(n: int, domain, rng: np.random.Generator | int | None = 0) -> np.ndarray:
    """``n`` uniform random positions in the box ``((x0, x1), (y0, y1))``."""
    rng = np.random.default_rng(rng)
    (x0, x1), (y0, y1) = domain
    return rng.uniform([x0, y0], [x1, y1], size=(n, 2))


def _rk4(flow: AnalyticFlow, p: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = flow.velocity(p, t)
    k2 = flow.velocity(p + 0.5 * h * k1, t + 0.5 * h)
    k3 = flow.velocity(p + 0.5 * h * k2, t + 0.5 * h)
    k4 = flow.velocity(p + h * k3, t + h)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _sample_times(t0: float, t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t_end > t0:
        raise ValueError(f"t_end must exceed t0, got [{t0}, {t_end}]")
    n = int(math.ceil((t_end - t0) / dt - 1e-9))
    times = t0 + dt * np.arange(n + 1)
    times[-1] = t_end
    return times


def _flow_positions(flow: AnalyticFlow, seeds: np.ndarray, times: np.ndarray, substeps: int,
                    keep_all: bool):
    p = np.array(seeds, dtype=float)
    out = [p.copy()] if keep_all else None
    for i in range(len(times) - 1):
        h = (times[i + 1] - times[i]) / substeps
        t = times[i]
        for j in range(substeps):
            p = _rk4(flow, p, t + j * h, h)
        bad = ~np.all(np.isfinite(p), axis=-1)
        if bad.any():
            idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise LGRError(f"non-finite velocity for seed {np.asarray(seeds)[idx].tolist()} "
                           f"between t={float(times[i])!r} and t={float(times[i + 1])!r}")
        if keep_all:
            out.append(p.copy())
    return np.stack(out) if keep_all else p


def advect(flow: AnalyticFlow, seeds, t0: float, t_end: float, dt: float,
           substeps: int = 1, first_id: int = 0) -> TrajectorySet:
    """Integrate ``seeds`` with classical RK4 and sample every ``dt``.

    A final shorter step lands exactly on ``t_end`` when the span is not a
    multiple of ``dt``. Seed ``i`` becomes tracer ``first_id + i``; frames are
    numbered from 0.
    """
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    times = _sample_times(t0, t_end, dt)
    traj = _flow_positions(flow, seeds, times, int(substeps), keep_all=True)  # (F, N, 2)
    n_frames, n = traj.shape[:2]
    ids = np.repeat(np.arange(first_id, first_id + n), n_frames)
    frames = np.tile(np.arange(n_frames), n)
    positions = traj.transpose(1, 0, 2).reshape(-1, 2)
    return TrajectorySet.from_arrays(ids, frames, positions, times)


@dataclass(frozen=True)
class GridSpec:
    x0: float = 0.0
    x1: float = 2.0
    nx: int = 512
    y0: float = 0.0
    y1: float = 1.0
    ny: int = 256

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.x0, self.x1, self.nx), np.linspace(self.y0, self.y1, self.ny)


@dataclass(frozen=True)
class OracleField:
    grid: GridSpec
    sigma: np.ndarray  # (ny, nx)
    t0: float
    t_end: float

    def sample(self, points) -> np.ndarray:
        """Bilinear interpolation of the FTLE field at ``points`` (n, 2)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        g = self.grid
        outside = ((pts[:, 0] < g.x0) | (pts[:, 0] > g.x1) | (pts[:, 1] < g.y0) | (pts[:, 1] > g.y1))
        if outside.any():
            p = pts[np.argmax(outside)].tolist()
            raise LGRError(f"query point {p} outside oracle grid "
                           f"[{g.x0}, {g.x1}] x [{g.y0}, {g.y1}]")
        gx, gy = g.axes()
        return RegularGridInterpolator((gy, gx), self.sigma)(pts[:, ::-1])


def dense_ftle_oracle(flow: AnalyticFlow, grid: GridSpec, t0: float, t_end: float,
                      dt: float | None = None) -> OracleField:
    """FTLE on a regular grid from finite-differenced flow maps.

    Each node is advected with RK4 (step ``dt``, default ``T/300``); the
    flow-map gradient uses central differences between neighboring nodes
    (one-sided on the boundary) and ``sigma = ln ||DF||_2 / T``.
    """
    T = t_end - t0
    if T == 0:
        raise ValueError("oracle interval must be non-zero")
    if dt is None:
        dt = abs(T) / 300.0
    gx, gy = grid.axes()
    nodes = np.stack(np.meshgrid(gx, gy), axis=-1)  # (ny, nx, 2)
    n = int(math.ceil(abs(T) / dt - 1e-9))
    h = T / n
    p = nodes.copy()
    for i in range(n):
        p = _rk4(flow, p, t0 + i * h, h)
    if not np.all(np.isfinite(p)):
        raise LGRError("non-finite flow map in oracle advection")
    hx = gx[1] - gx[0]
    hy = gy[1] - gy[0]
    jac = np.empty(p.shape[:2] + (2, 2))
    for c in range(2):
        jac[..., c, 0] = np.gradient(p[..., c], hx, axis=1)
        jac[..., c, 1] = np.gradient(p[..., c], hy, axis=0)
    s1 = np.linalg.norm(jac, ord=2, axis=(-2, -1))
    return OracleField(grid, np.log(s1) / abs(T), t0, t_end)


def apply_euclidean_motion(tset: TrajectorySet, theta: Callable[[float], float],
                           shift: Callable[[float], np.ndarray]) -> TrajectorySet:
    """Replace every sample ``x(t)`` by ``Q(theta(t)) x(t) + shift(t)``."""
    ids, frames, times, pos = tset.sample_arrays()
    uniq_t, inv = np.unique(times, return_inverse=True)
    ang = np.array([float(theta(t)) for t in uniq_t])
    off = np.array([np.asarray(shift(t), dtype=float).reshape(2) for t in uniq_t]).reshape(-1, 2)
    c, s = np.cos(ang)[inv], np.sin(ang)[inv]
    x, y = pos[:, 0], pos[:, 1]
    moved = np.stack([c * x - s * y, s * x + c * y], axis=1) + off[inv]
    return tset.with_positions(moved)
