"""Frame-to-frame association of point detections, plus track cleanup.

Association predicts each active track forward at constant velocity (zero
velocity for single-sample tracks) and matches predictions to detections
greedily by distance. A match must pass three gates: distance to the
prediction, implied speed, and implied acceleration (only for tracks with a
velocity estimate). Unmatched detections start new tracks; unmatched tracks
end.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d, median_filter
from scipy.spatial import cKDTree

from .errors import TrajectoryError
from .trajectories import TrajectorySet

__all__ = [
    "DetectionFrame",
    "GatingConfig",
    "SmoothingConfig",
    "Track",
    "Association",
    "associate",
    "track_detections",
    "detections_from_set",
    "smooth_trajectory",
    "smooth_set",
    "filter_min_length",
]


@dataclass(frozen=True)
class DetectionFrame:
    frame: int
    time: float
    positions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(p)):
            raise TrajectoryError(f"non-finite detection in frame {self.frame}")
        object.__setattr__(self, "positions", p)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class GatingConfig:
    """Association gates. No defaults: the right values depend on the scene."""

    max_speed: float
    max_accel: float
    max_match_radius: float

    def __post_init__(self):
        for name in ("max_speed", "max_accel", "max_match_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class SmoothingConfig:
    median_kernel: int = 5
    gaussian_kernel: int = 10
    gaussian_sigma: float | None = None  # samples; None means gaussian_kernel / 4

    def __post_init__(self):
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ValueError(f"median_kernel must be a positive odd integer, got {self.median_kernel}")
        if self.gaussian_kernel < 1:
            raise ValueError(f"gaussian_kernel must be positive, got {self.gaussian_kernel}")
        if self.gaussian_sigma is None:
            object.__setattr__(self, "gaussian_sigma", self.gaussian_kernel / 4.0)
        if not self.gaussian_sigma > 0:
            raise ValueError(f"gaussian_sigma must be positive, got {self.gaussian_sigma}")

    def gaussian_weights(self) -> np.ndarray:
        # taps at offsets -(L//2) .. L-1-L//2, matching correlate1d's centering
        offsets = np.arange(self.gaussian_kernel) - self.gaussian_kernel // 2
        w = np.exp(-0.5 * (offsets / self.gaussian_sigma) ** 2)
        return w / w.sum()


@dataclass
class Track:
    """A growing track. ``associate`` appends to matched tracks in place."""

    id: int
    frames: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    positions: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)

    def append(self, frame: int, t: float, position) -> None:
        self.frames.append(int(frame))
        self.times.append(float(t))
        self.positions.append(np.asarray(position, dtype=float))

    @property
    def last_position(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def velocity(self) -> np.ndarray | None:
        if len(self.frames) < 2:
            return None
        return (self.positions[-1] - self.positions[-2]) / (self.times[-1] - self.times[-2])

    def predict(self, t: float) -> np.ndarray:
        v = self.velocity
        if v is None:
            return self.last_position
        return self.last_position + v * (t - self.times[-1])


@dataclass
class Association:
    extended: list[Track]
    started: list[Track]
    terminated: list[Track]
    matches: list[tuple[int, int]]  # (track id, detection index)


def associate(tracks: Sequence[Track], detections: DetectionFrame, gating: GatingConfig,
              next_id: int) -> Association:
    """Extend ``tracks`` with the detections of the next frame.

    Candidate pairs are sorted by distance to the prediction, ties broken by
    detection index then track id, and accepted greedily when both sides are
    still free. New tracks get ids ``next_id, next_id + 1, ...`` in detection
    order.
    """
    dets = detections.positions
    t_new = detections.time
    n_det = len(dets)
    cands: list[tuple[float, int, int, int]] = []
    if tracks and n_det:
        preds = np.empty((len(tracks), 2))
        for i, tr in enumerate(tracks):
            dt = t_new - tr.times[-1]
            if not dt > 0:
                raise TrajectoryError(
                    f"non-positive time step {dt} between frame {tr.frames[-1]} and frame {detections.frame}")
            preds[i] = tr.predict(t_new)
        tree = cKDTree(dets)
        near = tree.query_ball_point(preds, r=gating.max_match_radius)
        for i, tr in enumerate(tracks):
            if not near[i]:
                continue
            js = np.asarray(near[i], dtype=np.intp)
            dt = t_new - tr.times[-1]
            step = dets[js] - tr.last_position
            v_new = step / dt
            ok = np.linalg.norm(v_new, axis=1) <= gating.max_speed
            v_old = tr.velocity
            if v_old is not None:
                ok &= np.linalg.norm(v_new - v_old, axis=1) / dt <= gating.max_accel
            dist = np.linalg.norm(dets[js] - preds[i], axis=1)
            ok &= dist <= gating.max_match_radius
            for j, d in zip(js[ok], dist[ok]):
                cands.append((float(d), int(j), int(tr.id), i))
    cands.sort()
    used_t: set[int] = set()
    used_d: set[int] = set()
    matches = []
    for d, j, tid, i in cands:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        matches.append((i, j))
    extended = []
    for i, j in sorted(matches):
        tracks[i].append(detections.frame, t_new, dets[j])
        extended.append(tracks[i])
    terminated = [tr for i, tr in enumerate(tracks) if i not in used_t]
    started = []
    for j in range(n_det):
        if j not in used_d:
            tr = Track(next_id)
            tr.append(detections.frame, t_new, dets[j])
            started.append(tr)
            next_id += 1
    return Association(extended, started, terminated, [(tracks[i].id, j) for i, j in matches])


def track_detections(frames: Iterable[DetectionFrame], gating: GatingConfig,
                     first_id: int = 0) -> TrajectorySet:
    """Link a detection sequence into trajectories.

    Frames are processed in frame order; every frame's time becomes a
    timestamp of the resulting set, including frames without detections.
    """
    frames = sorted(frames, key=lambda f: f.frame)
    for a, b in zip(frames[:-1], frames[1:]):
        if a.frame == b.frame:
            raise TrajectoryError(f"frame {a.frame} appears twice")
        if not b.time > a.time:
            raise TrajectoryError(f"non-positive time step between frames {a.frame} and {b.frame}")
    done: list[Track] = []
    active: list[Track] = []
    next_id = first_id
    for fr in frames:
        res = associate(active, fr, gating, next_id)
        next_id += len(res.started)
        done.extend(res.terminated)
        active = res.extended + res.started
    done.extend(active)
    done.sort(key=lambda tr: tr.id)
    ids = np.concatenate([np.full(len(tr), tr.id) for tr in done]) if done else np.empty(0)
    fr_idx = np.concatenate([tr.frames for tr in done]) if done else np.empty(0)
    pos = np.concatenate([np.array(tr.positions) for tr in done]) if done else np.empty((0, 2))
    return TrajectorySet.from_arrays(ids, fr_idx, pos, {f.frame: f.time for f in frames})


def detections_from_set(tset: TrajectorySet) -> list[DetectionFrame]:
    """Strip identities: one :class:`DetectionFrame` per frame, detections sorted by id."""
    out = []
    for f, t in zip(tset.frame_numbers.tolist(), tset.frame_times.tolist()):
        out.append(DetectionFrame(f, t, tset.frame_view(f).positions.copy()))
    return out


def smooth_trajectory(positions, cfg: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Median filter then truncated Gaussian, both with edge replication; length preserved."""
    p = np.asarray(positions, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if len(p) <= 1:
        return p.copy()
    out = median_filter(p, size=(cfg.median_kernel, 1), mode="nearest")
    return correlate1d(out, cfg.gaussian_weights(), axis=0, mode="nearest")


def smooth_set(tset: TrajectorySet, cfg: SmoothingConfig = SmoothingConfig()) -> TrajectorySet:
    pos = np.empty_like(tset.positions)
    for off, n in zip(tset.track_offset.tolist(), tset.track_length.tolist()):
        pos[off:off + n] = smooth_trajectory(tset.positions[off:off + n], cfg)
    return tset.with_positions(pos)


def filter_min_length(tset: TrajectorySet, min_length: int) -> TrajectorySet:
    """Drop tracks with fewer than ``min_length`` samples."""
    if min_length < 1:
        raise ValueError(f"min_length must be at least 1, got {min_length}")
    return tset.subset(np.flatnonzero(tset.track_length >= min_length))
