"""Lagrangian gradient regression.

Short-time flow-map Jacobians are fitted from the displacements of a tracer's
neighbors relative to the tracer itself::

    DF ~= X1 K X0^T (X0 K X0^T + gamma n I)^-1

with ``X0``/``X1`` the (d, n) displacement matrices at the start and end
frame and ``K`` a diagonal Gaussian weighting of the start displacements.
Velocity gradients follow from ``(DF - I) / dt`` and finite-time Jacobians
from products of consecutive short-time ones.

The regression assumes the frame spacing is short compared with the flow's
own time scale; nothing here can check that from data.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientNeighborsError, RankDeficiencyError
from .trajectories import TrajectorySet

__all__ = [
    "KernelConfig",
    "FlowMapJacobian",
    "VelocityGradient",
    "LAB_PRESET",
    "FIELD_PRESET",
    "RCOND_TOL",
    "gaussian_kernel_weights",
    "solve_jacobian",
    "regress_jacobian",
    "velocity_gradient",
    "compose_jacobians",
]

#: normal matrices with lambda_min / lambda_max below this are treated as singular
RCOND_TOL = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    """Neighbor count ``k``, Gaussian bandwidth ``s`` (world units), regularization ``gamma``."""

    k: int = 15
    s: float = 0.03
    gamma: float = 1e-10
    dim: int = 2

    def __post_init__(self):
        if self.k < self.dim + 1:
            raise ValueError(f"k must be at least d+1={self.dim + 1}, got {self.k}")
        if not self.s > 0:
            raise ValueError(f"bandwidth s must be positive, got {self.s}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


#: laboratory water-channel configuration (60 Hz video)
LAB_PRESET = KernelConfig(k=15, s=0.03)
#: pond field configuration (30 Hz video)
FIELD_PRESET = KernelConfig(k=25, s=0.6)


@dataclass(frozen=True)
class FlowMapJacobian:
    matrix: np.ndarray
    center: int | None
    interval: tuple[int, int]
    shortfall: bool = False
    n_used: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("Jacobian entries must be finite")
        a, b = self.interval
        if b < a:
            raise ValueError(f"invalid Jacobian interval {self.interval}")


@dataclass(frozen=True)
class VelocityGradient:
    matrix: np.ndarray
    center: int | None
    frame: int | None = None


def gaussian_kernel_weights(displacements, s: float) -> np.ndarray:
    """``exp(-|dx|^2 / (2 s^2))`` for each row of ``displacements``."""
    if not s > 0:
        raise ValueError(f"bandwidth s must be positive, got {s}")
    d = np.asarray(displacements, dtype=float)
    d = d.reshape(-1, d.shape[-1]) if d.ndim > 1 else d.reshape(1, -1)
    return np.exp(-(d * d).sum(axis=1) / (2.0 * s * s))


def solve_jacobian(x0: np.ndarray, x1: np.ndarray, weights: np.ndarray, gamma: float,
                   center=None) -> np.ndarray:
    """Weighted least-squares Jacobian from (d, n) displacement matrices."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    w = np.asarray(weights, dtype=float)
    d, n = x0.shape
    normal = (x0 * w) @ x0.T + gamma * n * np.eye(d)
    rhs = (x1 * w) @ x0.T
    eig = np.linalg.eigvalsh(normal)
    if not (eig[-1] > 0 and eig[0] > RCOND_TOL * eig[-1]):
        raise RankDeficiencyError(
            f"singular normal matrix for center tracer {center} "
            f"(eigenvalues {eig.tolist()}, gamma={gamma}); neighbors may be collinear, retry with gamma > 0",
            center=center)
    # normal is symmetric, so (rhs @ inv(normal)) = solve(normal, rhs^T)^T
    return np.linalg.solve(normal, rhs.T).T


def regress_jacobian(tset: TrajectorySet, center: int, neighbor_ids: Sequence[int],
                     frame_start: int, frame_end: int, cfg: KernelConfig) -> FlowMapJacobian:
    """Regress the flow-map Jacobian of ``center`` over ``[frame_start, frame_end]``.

    Parameters
    ----------
    tset : TrajectorySet
        Source trajectories; center and neighbors must be present at both frames.
    center : int
        Tracer id the Jacobian is attached to.
    neighbor_ids : sequence of int
        Tracers whose relative displacements populate the regression.
    frame_start, frame_end : int
        Interval endpoints. Equal endpoints give the identity.
    cfg : KernelConfig
        Bandwidth and regularization (``cfg.k`` is not used here).

    Raises
    ------
    RankDeficiencyError
        The weighted normal matrix is singular (e.g. collinear neighbors).
    InsufficientNeighborsError
        Fewer than d+1 neighbors with ``gamma == 0``.
    """
    d = tset.dim
    if frame_end == frame_start:
        tset.positions_at([tset.row_of(center)], frame_start)
        return FlowMapJacobian(np.eye(d), int(center), (frame_start, frame_end), False, 0)
    if frame_end < frame_start:
        raise ValueError(f"invalid interval [{frame_start}, {frame_end}]")
    neighbor_ids = [int(i) for i in neighbor_ids]
    if int(center) in neighbor_ids:
        raise ValueError(f"center tracer {center} listed among its own neighbors")
    c_row = tset.row_of(center)
    rows = tset.rows_of(neighbor_ids)
    c0 = tset.positions_at([c_row], frame_start)[0]
    c1 = tset.positions_at([c_row], frame_end)[0]
    x0 = (tset.positions_at(rows, frame_start) - c0).T
    x1 = (tset.positions_at(rows, frame_end) - c1).T
    n = x0.shape[1]
    w = gaussian_kernel_weights(x0.T, cfg.s) if n else np.empty(0)
    matrix = solve_jacobian(x0, x1, w, cfg.gamma, center=center)
    shortfall = n < d + 1
    if shortfall and cfg.gamma == 0:
        raise InsufficientNeighborsError(
            f"center tracer {center} has {n} neighbors; need at least {d + 1} without regularization",
            center=center)
    return FlowMapJacobian(matrix, int(center), (frame_start, frame_end), shortfall, n)


def velocity_gradient(jac: FlowMapJacobian, dt: float, frame: int | None = None) -> VelocityGradient:
    """``(DF - I) / dt`` for a Jacobian spanning one inter-frame step of ``dt`` seconds."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    m = np.asarray(jac.matrix, dtype=float)
    grad = (m - np.eye(m.shape[0])) / dt
    return VelocityGradient(grad, jac.center, jac.interval[0] if frame is None else frame)


def compose_jacobians(chain: Sequence[FlowMapJacobian]) -> FlowMapJacobian:
    """Product of consecutive Jacobians, later intervals multiplied on the left."""
    if not chain:
        raise ValueError("cannot compose an empty chain")
    for prev, nxt in zip(chain[:-1], chain[1:]):
        if prev.interval[1] != nxt.interval[0]:
            raise ValueError(
                f"non-contiguous chain: interval {prev.interval} is followed by {nxt.interval} "
                f"(gap between frames {prev.interval[1]} and {nxt.interval[0]})")
        if prev.center != nxt.center:
            raise ValueError(f"chain mixes center tracers {prev.center} and {nxt.center}")
    out = np.asarray(chain[0].matrix, dtype=float)
    for j in chain[1:]:
        out = np.asarray(j.matrix) @ out
    return FlowMapJacobian(out, chain[0].center, (chain[0].interval[0], chain[-1].interval[1]),
                           any(j.shortfall for j in chain), min(j.n_used for j in chain))
