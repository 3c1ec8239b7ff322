"""Objective flow diagnostics built on velocity gradients and flow-map Jacobians.

Tensor-level operations (spin/stretch split, vorticity, principal strain
rate) act on velocity gradients ``grad[i, j] = d v_i / d x_j`` and broadcast
over leading axes. Finite-time operations act on Jacobians and trajectories.

Two short-time rates read a one-step Jacobian ``DF`` directly:
:func:`rotation_rate` (twice the rotation angle of ``DF`` per unit time) and
:func:`stretch_rate` (excess of the largest singular value per unit time).
They agree with ``vorticity_2d`` and ``principal_strain_rate`` of
``(DF - I) / dt`` to first order in ``dt``, but stay exact under rigid
observer motion at finite ``dt``: a frame rotating by ``a`` over the step adds
exactly ``2 a / dt`` to the rotation rate and leaves the stretch rate alone.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .lgr import FlowMapJacobian

__all__ = [
    "SpinStretch",
    "MetricSample",
    "METRIC_KINDS",
    "spin_stretch_decompose",
    "vorticity_2d",
    "mean_vorticity",
    "vorticity_deviation",
    "principal_strain_rate",
    "largest_singular_value",
    "ftle",
    "lavd",
    "rotation_rate",
    "stretch_rate",
]

#: instantaneous (one-step) and finite-time metric names
INSTANTANEOUS_KINDS = ("vorticity", "vorticity_deviation", "strain_rate",
                       "dudx", "dudy", "dvdx", "dvdy")
FINITE_TIME_KINDS = ("ftle", "lavd", "ira")
METRIC_KINDS = INSTANTANEOUS_KINDS + FINITE_TIME_KINDS


@dataclass(frozen=True)
class SpinStretch:
    spin: np.ndarray
    stretch: np.ndarray

    @property
    def W(self) -> np.ndarray:
        return self.spin

    @property
    def D(self) -> np.ndarray:
        return self.stretch


@dataclass(frozen=True)
class MetricSample:
    tracer_id: int
    position: tuple[float, ...]
    value: float
    metric: str
    interval: tuple[int, int]


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def spin_stretch_decompose(grad) -> SpinStretch:
    g = np.asarray(grad, dtype=float)
    return SpinStretch(0.5 * (g - _swap(g)), 0.5 * (g + _swap(g)))


def vorticity_2d(grad):
    """Planar vorticity ``dv/dx - du/dy`` (rows are velocity components)."""
    g = np.asarray(grad, dtype=float)
    if g.shape[-2:] != (2, 2):
        raise ValueError(f"planar vorticity needs 2x2 gradients, got shape {g.shape}")
    w = g[..., 1, 0] - g[..., 0, 1]
    return float(w) if w.ndim == 0 else w


def mean_vorticity(values) -> float:
    """Spatial average: plain mean over the tracers that carry a gradient."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise ValueError("mean vorticity of an empty sample")
    return float(v.mean())


def vorticity_deviation(omega, mean):
    d = np.abs(np.asarray(omega, dtype=float) - mean)
    return float(d) if d.ndim == 0 else d


def principal_strain_rate(stretch, atol: float = 1e-9):
    """Largest eigenvalue of a symmetric 2x2 stretch tensor (closed form)."""
    s = np.asarray(stretch, dtype=float)
    if s.shape[-2:] != (2, 2):
        raise ValueError(f"expected 2x2 tensors, got shape {s.shape}")
    asym = np.abs(s[..., 0, 1] - s[..., 1, 0])
    if np.any(asym > atol):
        raise ValueError(f"stretch tensor is not symmetric (|D01 - D10| = {float(np.max(asym)):.3g})")
    a, d = s[..., 0, 0], s[..., 1, 1]
    b = 0.5 * (s[..., 0, 1] + s[..., 1, 0])
    lam = 0.5 * (a + d) + np.hypot(0.5 * (a - d), b)
    return float(lam) if lam.ndim == 0 else lam


def largest_singular_value(m):
    """Spectral norm of 2x2 matrices via their conformal/anticonformal split."""
    m = np.asarray(m, dtype=float)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    s1 = 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))
    return float(s1) if s1.ndim == 0 else s1


def _matrix(jac) -> np.ndarray:
    return np.asarray(jac.matrix if isinstance(jac, FlowMapJacobian) else jac, dtype=float)


def ftle(jac, dt_total: float):
    """Finite-time Lyapunov exponent ``ln(||DF||_2) / dt_total``; may be negative."""
    if not dt_total > 0:
        raise ValueError(f"FTLE interval must be positive, got {dt_total}")
    m = _matrix(jac)
    s1 = largest_singular_value(m) if m.shape[-2:] == (2, 2) else np.linalg.norm(m, 2, axis=(-2, -1))
    if np.any(np.asarray(s1) <= 0):
        raise ValueError("FTLE undefined for a zero Jacobian (log of zero)")
    out = np.log(s1) / dt_total
    return float(out) if np.ndim(out) == 0 else out


def lavd(times: Sequence[float], deviations: Sequence[float]) -> tuple[float, float]:
    """Trapezoidal integral of vorticity deviation along one trajectory.

    Returns ``(lavd, psi)`` where ``psi = lavd / 2`` is the intrinsic rotation angle.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    w = np.asarray(deviations, dtype=float).reshape(-1)
    if len(t) < 2:
        raise ValueError(f"LAVD needs at least 2 samples, got {len(t)}")
    if len(t) != len(w):
        raise ValueError("times and deviations differ in length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("LAVD sample times must strictly increase")
    if np.any(w < 0):
        raise ValueError("vorticity deviation samples must be non-negative")
    value = float(np.sum(0.5 * (w[1:] + w[:-1]) * np.diff(t)))
    return value, 0.5 * value


def rotation_rate(jac, dt: float):
    """Vorticity read from a one-step Jacobian: ``2 atan2(DF10 - DF01, DF00 + DF11) / dt``."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    m = _matrix(jac)
    r = 2.0 * np.arctan2(m[..., 1, 0] - m[..., 0, 1], m[..., 0, 0] + m[..., 1, 1]) / dt
    return float(r) if r.ndim == 0 else r


def stretch_rate(jac, dt: float):
    """Principal strain rate read from a one-step Jacobian: ``(s1(DF) - 1) / dt``."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    r = (np.asarray(largest_singular_value(_matrix(jac))) - 1.0) / dt
    return float(r) if r.ndim == 0 else r
