"""Field computations over every eligible tracer of a trajectory set.

Each inter-frame step regresses one Jacobian per tracer that persists across
the step, using its ``k`` nearest neighbors among the tracers that also
persist across that step (neighbors are re-selected every step). Finite-time
metrics are reported for tracers present over the whole interval; tracers
that cannot be evaluated are counted by reason, never extrapolated.
"""

from __future__ import annotations

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import backend as _backend
from .errors import NoEligibleTracersError, TrajectoryError
from .lgr import RCOND_TOL, KernelConfig
from .metrics import (
    FINITE_TIME_KINDS,
    INSTANTANEOUS_KINDS,
    METRIC_KINDS,
    MetricSample,
    largest_singular_value,
    lavd,
    principal_strain_rate,
    rotation_rate,
    spin_stretch_decompose,
    stretch_rate,
    vorticity_2d,
)
from .neighbors import batch_neighbors
from .trajectories import TrajectorySet

__all__ = ["Diagnostics", "FieldResult", "StepRegression", "SCHEMES",
           "regress_step", "compute_metrics", "field_pipeline"]

#: how scalar rates are read from one-step Jacobians
SCHEMES = ("polar", "difference")

_REASONS = {
    _backend.STATUS_INSUFFICIENT: "insufficient_neighbors",
    _backend.STATUS_SINGULAR: "rank_deficient",
}


@dataclass
class Diagnostics:
    metric: str
    interval: tuple[int, int]
    candidates: int = 0
    emitted: int = 0
    skipped: dict = field(default_factory=dict)
    shortfall: int = 0
    steps: int = 0
    backend: str = ""
    workers: int = 1
    seconds: float = 0.0

    def summary_lines(self) -> list[str]:
        lines = [
            f"metric: {self.metric}",
            f"interval: {self.interval[0]}-{self.interval[1]}",
            f"candidates: {self.candidates}",
            f"emitted: {self.emitted}",
            f"shortfall_used_fewer_than_k: {self.shortfall}",
        ]
        for reason in sorted(set(self.skipped) | {"not_persisting", "insufficient_neighbors", "rank_deficient"}):
            lines.append(f"skipped_{reason}: {self.skipped.get(reason, 0)}")
        lines += [f"steps: {self.steps}", f"backend: {self.backend}",
                  f"workers: {self.workers}", f"seconds: {self.seconds:.3f}"]
        return lines


@dataclass
class FieldResult:
    samples: list[MetricSample]
    diagnostics: Diagnostics

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def ids(self) -> np.ndarray:
        return np.array([s.tracer_id for s in self.samples], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples], dtype=float)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.samples], dtype=float).reshape(len(self.samples), -1)


@dataclass
class StepRegression:
    """One-step Jacobians for the tracers persisting over ``frame -> frame + 1``."""

    frame: int
    dt: float
    rows: np.ndarray        # track rows of the regressed centers
    matrices: np.ndarray    # (m, 2, 2); NaN where status != 0
    n_used: np.ndarray
    status: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == _backend.STATUS_OK


def _chunks(m: int, workers: int) -> list[np.ndarray]:
    if workers <= 1 or m < 2 * workers:
        return [np.arange(m)]
    return [c for c in np.array_split(np.arange(m), workers) if len(c)]


def regress_step(tset: TrajectorySet, frame: int, cfg: KernelConfig, center_rows=None,
                 workers: int = 1, backend: str | None = None) -> StepRegression:
    """Regress Jacobians over ``frame -> frame + 1`` for ``center_rows`` (default: all persisting)."""
    if tset.dim != 2:
        raise ValueError(f"batch regression supports planar data only, got d={tset.dim}")
    kernels = _backend.get_backend(backend)
    f1 = frame + 1
    if not tset.has_frame(f1):
        raise TrajectoryError(f"frame {frame} has no successor frame {f1}")
    dt = tset.time_of(f1) - tset.time_of(frame)
    rows = tset.persisting_rows(frame, f1)
    if center_rows is None:
        local = np.arange(len(rows))
    else:
        local = np.searchsorted(rows, center_rows)
        if np.any(local >= len(rows)) or np.any(rows[np.minimum(local, len(rows) - 1)] != center_rows):
            raise TrajectoryError(f"some centers do not persist from frame {frame} to {f1}")
    m = len(local)
    if m == 0:
        empty = np.empty(0, dtype=np.intp)
        return StepRegression(frame, dt, empty, np.empty((0, 2, 2)), empty, np.empty(0, dtype=np.int8))
    x0 = np.ascontiguousarray(tset.positions_at(rows, frame))
    x1 = np.ascontiguousarray(tset.positions_at(rows, f1))
    tree = cKDTree(x0)
    nbrs = batch_neighbors(x0, local, tset.track_ids[rows], cfg.k, tree=tree, workers=workers)
    local = np.ascontiguousarray(local, dtype=np.intp)
    nbrs = np.ascontiguousarray(nbrs, dtype=np.intp)

    def run(idx):
        return kernels.regress_batch(x0, x1, local[idx], nbrs[idx], float(cfg.s), float(cfg.gamma),
                                     RCOND_TOL, cfg.dim + 1)

    parts = _chunks(m, workers)
    if len(parts) == 1:
        results = [run(parts[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    mats = np.concatenate([r[0] for r in results])
    n_used = np.concatenate([r[1] for r in results])
    status = np.concatenate([r[2] for r in results])
    return StepRegression(frame, dt, rows[local], mats, n_used, status)


def _vorticity(mats: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    if scheme == "polar":
        return np.asarray(rotation_rate(mats, dt))
    return np.asarray(vorticity_2d((mats - np.eye(2)) / dt))


def _strain(mats: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    if scheme == "polar":
        return np.asarray(stretch_rate(mats, dt))
    return np.asarray(principal_strain_rate(spin_stretch_decompose((mats - np.eye(2)) / dt).stretch))


def compute_metrics(tset: TrajectorySet, cfg: KernelConfig, frame_start: int, frame_end: int,
                    kinds, scheme: str = "polar", workers: int = 1,
                    backend: str | None = None, strict: bool = True) -> dict[str, FieldResult]:
    """Evaluate several metrics over one interval, sharing the per-step regressions.

    Instantaneous kinds (vorticity, vorticity_deviation, strain_rate and the
    gradient components dudx/dudy/dvdx/dvdy) need ``frame_end == frame_start + 1``.
    Finite-time kinds (ftle, lavd, ira) accept any ``frame_end > frame_start``.
    With ``strict`` an empty result raises :class:`NoEligibleTracersError`.
    """
    t_begin = time.perf_counter()
    kinds = list(dict.fromkeys(kinds))
    unknown = [k for k in kinds if k not in METRIC_KINDS]
    if unknown:
        raise ValueError(f"unknown metric(s) {unknown}; choose from {list(METRIC_KINDS)}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {list(SCHEMES)}")
    if not kinds:
        raise ValueError("no metrics requested")
    if frame_end <= frame_start:
        raise TrajectoryError(f"invalid interval [{frame_start}, {frame_end}]: need frame_end > frame_start")
    tset.persisting_rows(frame_start, frame_end)  # validates both frames
    if any(k in INSTANTANEOUS_KINDS for k in kinds) and frame_end != frame_start + 1:
        raise TrajectoryError(
            f"instantaneous metrics need a one-step interval, got [{frame_start}, {frame_end}]")
    backend_name = backend or _backend.BACKEND

    present = np.flatnonzero(tset.present_mask(frame_start))
    centers = tset.persisting_rows(frame_start, frame_end)
    n_c = len(centers)
    reason = np.full(n_c, "", dtype=object)
    shortfall = np.zeros(n_c, dtype=bool)
    need_all = any(k in ("lavd", "ira") or k in INSTANTANEOUS_KINDS for k in kinds)
    need_ftle = "ftle" in kinds
    acc = np.tile(np.eye(2), (n_c, 1, 1)) if need_ftle else None
    n_steps = frame_end - frame_start
    deviation = np.zeros((n_steps, n_c)) if need_all else None
    inst = {}
    kernels = _backend.get_backend(backend)

    for step, f in enumerate(range(frame_start, frame_end)):
        alive = reason == ""
        if not alive.any():
            break
        want = None if need_all else centers[alive]
        reg = regress_step(tset, f, cfg, center_rows=want, workers=workers, backend=backend)
        pos = np.searchsorted(reg.rows, centers)
        pos = np.minimum(pos, max(len(reg.rows) - 1, 0))
        ok_all = reg.ok
        c_status = reg.status[pos]
        c_ok = ok_all[pos]
        newly_bad = alive & ~c_ok
        for i in np.flatnonzero(newly_bad):
            reason[i] = _REASONS[int(c_status[i])]
        shortfall |= alive & c_ok & (reg.n_used[pos] < cfg.k)
        live = np.flatnonzero(reason == "")

        if need_ftle and len(live):
            kernels.compose_batch(acc, np.ascontiguousarray(reg.matrices[pos[live]]),
                                  np.ascontiguousarray(live, dtype=np.intp))
        if need_all:
            omega = np.full(len(reg.rows), np.nan)
            omega[ok_all] = _vorticity(reg.matrices[ok_all], reg.dt, scheme)
            if ok_all.any():
                mean = float(omega[ok_all].mean())
                deviation[step, live] = np.abs(omega[pos[live]] - mean)
            if n_steps == 1:
                mats = reg.matrices[pos]
                grad = (mats - np.eye(2)) / reg.dt
                strain = np.full(n_c, np.nan)
                strain[c_ok] = _strain(mats[c_ok], reg.dt, scheme)
                inst = {
                    "vorticity": omega[pos],
                    "vorticity_deviation": deviation[0],
                    "strain_rate": strain,
                    "dudx": grad[:, 0, 0], "dudy": grad[:, 0, 1],
                    "dvdx": grad[:, 1, 0], "dvdy": grad[:, 1, 1],
                }

    ok = reason == ""
    t0 = tset.time_of(frame_start)
    t1 = tset.time_of(frame_end)
    frame_times = np.array([tset.time_of(f) for f in range(frame_start, frame_end + 1)])
    start_pos = tset.positions_at(centers, frame_start) if n_c else np.empty((0, 2))
    values: dict[str, np.ndarray] = {}
    for k in kinds:
        if k in INSTANTANEOUS_KINDS:
            values[k] = inst[k] if inst else np.full(n_c, np.nan)
        elif k == "ftle":
            s1 = largest_singular_value(acc) if n_c else np.empty(0)
            with np.errstate(divide="ignore", invalid="ignore"):
                values[k] = np.log(s1) / (t1 - t0)
        else:
            out = np.full(n_c, np.nan)
            for i in np.flatnonzero(ok):
                # per-step deviations sit at the step's start time; the final frame repeats the last step
                series = np.append(deviation[:, i], deviation[-1, i])
                out[i] = lavd(frame_times, series)[0]
            values[k] = out if k == "lavd" else 0.5 * out

    skipped = Counter(reason[~ok].tolist())
    skipped["not_persisting"] = len(present) - n_c
    elapsed = time.perf_counter() - t_begin
    results = {}
    for k in kinds:
        keep = ok & np.isfinite(values[k])
        samples = [MetricSample(int(tset.track_ids[centers[i]]), tuple(float(v) for v in start_pos[i]),
                                float(values[k][i]), k, (int(frame_start), int(frame_end)))
                   for i in np.flatnonzero(keep)]
        diag = Diagnostics(k, (int(frame_start), int(frame_end)), candidates=len(present),
                           emitted=len(samples), skipped=dict(skipped),
                           shortfall=int((shortfall & keep).sum()), steps=n_steps,
                           backend=backend_name, workers=workers, seconds=elapsed)
        if strict and not samples:
            raise NoEligibleTracersError(
                f"no eligible tracers for {k} over frames [{frame_start}, {frame_end}]: "
                + ", ".join(diag.summary_lines()[2:]), diagnostics=diag)
        results[k] = FieldResult(samples, diag)
    return results


def field_pipeline(tset: TrajectorySet, cfg: KernelConfig, frame_start: int, frame_end: int,
                   metric: str, scheme: str = "polar", workers: int = 1,
                   backend: str | None = None) -> FieldResult:
    """One metric over ``[frame_start, frame_end]`` for every eligible tracer."""
    return compute_metrics(tset, cfg, frame_start, frame_end, [metric], scheme=scheme,
                           workers=workers, backend=backend)[metric]
