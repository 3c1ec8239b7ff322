"""Columnar storage for multi-object trajectories.

A :class:`TrajectorySet` holds every tracer sample sorted by ``(id, frame)``.
Each track covers a contiguous run of frame indices, so the sample for
``(id, frame)`` sits at ``offset[id] + frame - start[id]`` and windows over a
frame interval are plain fancy-indexing. Sets are immutable after
construction; derived sets (subsets, moved positions) are new objects.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import TrajectoryError

__all__ = [
    "FrameView",
    "TrajectorySet",
    "build_trajectory_set",
    "frame_view",
    "persisting_ids",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrameView:
    """Tracers present at one frame, sorted by id."""

    frame: int
    time: float
    ids: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[tuple[int, np.ndarray]]:
        for i, p in zip(self.ids, self.positions):
            yield int(i), p


def _normalize_timestamps(timestamps) -> tuple[np.ndarray, np.ndarray]:
    if timestamps is None:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=float)
    if isinstance(timestamps, Mapping):
        items = sorted((int(f), float(t)) for f, t in timestamps.items())
        frames = np.array([f for f, _ in items], dtype=np.int64)
        times = np.array([t for _, t in items], dtype=float)
    else:
        times = np.asarray(timestamps, dtype=float).reshape(-1)
        frames = np.arange(len(times), dtype=np.int64)
    if len(frames) and frames[0] < 0:
        raise TrajectoryError(f"frame indices must be non-negative, got {frames[0]}")
    if not np.all(np.isfinite(times)):
        raise TrajectoryError("timestamps must be finite")
    if np.any(np.diff(times) <= 0):
        bad = int(np.argmax(np.diff(times) <= 0))
        raise TrajectoryError(
            f"timestamps must strictly increase with frame index: "
            f"frame {frames[bad]} t={float(times[bad])!r}, frame {frames[bad + 1]} t={float(times[bad + 1])!r}"
        )
    return frames, times


class TrajectorySet:
    """Immutable set of tracer trajectories in ``dim`` dimensions.

    Use :func:`build_trajectory_set` or :meth:`from_arrays` to construct one;
    the initializer trusts its inputs.
    """

    def __init__(self, dim, frame_numbers, frame_times, track_ids, track_start,
                 track_length, positions):
        self.dim = int(dim)
        self.frame_numbers = _readonly(np.asarray(frame_numbers, dtype=np.int64))
        self.frame_times = _readonly(np.asarray(frame_times, dtype=float))
        self.track_ids = _readonly(np.asarray(track_ids, dtype=np.int64))
        self.track_start = _readonly(np.asarray(track_start, dtype=np.int64))
        self.track_length = _readonly(np.asarray(track_length, dtype=np.int64))
        offset = np.zeros(len(self.track_ids), dtype=np.int64)
        if len(offset):
            offset[1:] = np.cumsum(self.track_length)[:-1]
        self.track_offset = _readonly(offset)
        self.positions = _readonly(np.asarray(positions, dtype=float).reshape(-1, self.dim))
        self._frame_pos = {int(f): j for j, f in enumerate(self.frame_numbers)}
        self._by_frame = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_arrays(cls, ids, frames, positions, timestamps, dim: int = 2) -> "TrajectorySet":
        """Build a set from parallel sample arrays.

        Tracks with missing frames are split: every segment after the first
        gets a fresh id ``max(existing) + 1``, assigned to tracks in order of
        first appearance in the input and to segments in frame order.
        """
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        frames = np.asarray(frames, dtype=np.int64).reshape(-1)
        positions = np.asarray(positions, dtype=float).reshape(-1, dim)
        if not (len(ids) == len(frames) == len(positions)):
            raise TrajectoryError("ids, frames and positions must have equal length")
        frame_numbers, frame_times = _normalize_timestamps(timestamps)

        if len(ids) == 0:
            return cls(dim, frame_numbers, frame_times, [], [], [], np.empty((0, dim)))

        if np.any(ids < 0):
            raise TrajectoryError(f"tracer ids must be non-negative, got {int(ids.min())}")
        finite = np.all(np.isfinite(positions), axis=1)
        if not finite.all():
            i = int(np.argmin(finite))
            raise TrajectoryError(
                f"non-finite position {positions[i].tolist()} for tracer {ids[i]} at frame {frames[i]}"
            )
        known = np.isin(frames, frame_numbers)
        if not known.all():
            i = int(np.argmin(known))
            raise TrajectoryError(f"frame {frames[i]} of tracer {ids[i]} has no timestamp")

        order = np.lexsort((frames, ids))
        s_ids, s_frames = ids[order], frames[order]
        dup = (s_ids[1:] == s_ids[:-1]) & (s_frames[1:] == s_frames[:-1])
        if dup.any():
            i = int(np.argmax(dup))
            raise TrajectoryError(f"duplicate sample for (tracer {s_ids[i]}, frame {s_frames[i]})")

        # segment boundaries: new id or a frame gap within the same id
        new_seg = np.ones(len(s_ids), dtype=bool)
        new_seg[1:] = (s_ids[1:] != s_ids[:-1]) | (s_frames[1:] != s_frames[:-1] + 1)
        seg_start = np.flatnonzero(new_seg)
        seg_id = s_ids[seg_start].copy()
        first_of_id = np.ones(len(seg_start), dtype=bool)
        first_of_id[1:] = seg_id[1:] != seg_id[:-1]
        split = np.flatnonzero(~first_of_id)
        if len(split):
            uniq, first_idx = np.unique(ids, return_index=True)
            appearance = dict(zip(uniq.tolist(), first_idx.tolist()))
            # stable: by first appearance of the original id, then by frame
            split = sorted(split.tolist(), key=lambda j: (appearance[int(seg_id[j])], j))
            next_id = int(ids.max()) + 1
            for j in split:
                seg_id[j] = next_id
                next_id += 1

        seg_len = np.diff(np.append(seg_start, len(s_ids)))
        seg_first_frame = s_frames[seg_start]
        sample_seg = np.repeat(np.arange(len(seg_start)), seg_len)
        # reorder segments by their (possibly new) id
        seg_order = np.argsort(seg_id, kind="stable")
        rank = np.empty_like(seg_order)
        rank[seg_order] = np.arange(len(seg_order))
        sample_order = np.lexsort((s_frames, rank[sample_seg]))
        pos_sorted = positions[order][sample_order]
        return cls(dim, frame_numbers, frame_times, seg_id[seg_order],
                   seg_first_frame[seg_order], seg_len[seg_order], pos_sorted)

    # -- basic properties -------------------------------------------------

    @property
    def ids(self) -> np.ndarray:
        return self.track_ids

    @property
    def n_tracks(self) -> int:
        return len(self.track_ids)

    @property
    def n_frames(self) -> int:
        return len(self.frame_numbers)

    @property
    def n_samples(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return self.n_tracks

    def __repr__(self) -> str:
        return (f"TrajectorySet(dim={self.dim}, tracks={self.n_tracks}, "
                f"frames={self.n_frames}, samples={self.n_samples})")

    @property
    def track_end(self) -> np.ndarray:
        """Last frame index of every track (inclusive)."""
        return self.track_start + self.track_length - 1

    def has_frame(self, frame: int) -> bool:
        return int(frame) in self._frame_pos

    def _check_frame(self, frame: int) -> int:
        try:
            return self._frame_pos[int(frame)]
        except KeyError:
            if self.n_frames == 0:
                raise TrajectoryError(f"frame {frame} requested from a set with no frames") from None
            lo, hi = int(self.frame_numbers[0]), int(self.frame_numbers[-1])
            extra = "" if hi - lo + 1 == self.n_frames else " (with gaps)"
            raise TrajectoryError(f"frame {frame} outside valid range [{lo}, {hi}]{extra}") from None

    def time_of(self, frame: int) -> float:
        return float(self.frame_times[self._check_frame(frame)])

    def row_of(self, tracer_id: int) -> int:
        row = int(np.searchsorted(self.track_ids, tracer_id))
        if row >= self.n_tracks or self.track_ids[row] != tracer_id:
            raise TrajectoryError(f"unknown tracer id {tracer_id}")
        return row

    def rows_of(self, tracer_ids) -> np.ndarray:
        tracer_ids = np.asarray(tracer_ids, dtype=np.int64).reshape(-1)
        rows = np.searchsorted(self.track_ids, tracer_ids)
        ok = rows < self.n_tracks
        ok[ok] = self.track_ids[rows[ok]] == tracer_ids[ok]
        if not ok.all():
            raise TrajectoryError(f"unknown tracer id {int(tracer_ids[np.argmin(ok)])}")
        return rows

    # -- per-track access -------------------------------------------------

    def track(self, tracer_id: int) -> tuple[np.ndarray, np.ndarray]:
        """``(frames, positions)`` of one tracer."""
        row = self.row_of(tracer_id)
        start, n, off = self.track_start[row], self.track_length[row], self.track_offset[row]
        return np.arange(start, start + n), self.positions[off:off + n]

    def lengths(self) -> dict[int, int]:
        return dict(zip(self.track_ids.tolist(), self.track_length.tolist()))

    # -- per-frame access -------------------------------------------------

    def _frame_index(self):
        if self._by_frame is None:
            sample_rows = np.repeat(np.arange(self.n_tracks), self.track_length)
            sample_frames = np.repeat(self.track_start, self.track_length) + (
                np.arange(self.n_samples) - np.repeat(self.track_offset, self.track_length))
            order = np.lexsort((self.track_ids[sample_rows], sample_frames))
            bounds = np.searchsorted(sample_frames[order],
                                     np.append(self.frame_numbers, np.iinfo(np.int64).max))
            self._by_frame = (order, sample_rows[order], bounds)
        return self._by_frame

    def frame_view(self, frame: int) -> FrameView:
        j = self._check_frame(frame)
        order, rows, bounds = self._frame_index()
        sl = slice(bounds[j], bounds[j + 1])
        return FrameView(int(frame), float(self.frame_times[j]),
                         self.track_ids[rows[sl]], self.positions[order[sl]])

    def present_mask(self, frame: int) -> np.ndarray:
        """Boolean mask over tracks that have a sample at ``frame``."""
        self._check_frame(frame)
        return (self.track_start <= frame) & (self.track_end >= frame)

    def persisting_rows(self, frame_start: int, frame_end: int) -> np.ndarray:
        self._check_frame(frame_start)
        self._check_frame(frame_end)
        if frame_start > frame_end:
            raise TrajectoryError(f"invalid interval [{frame_start}, {frame_end}]: start after end")
        return np.flatnonzero((self.track_start <= frame_start) & (self.track_end >= frame_end))

    def persisting_ids(self, frame_start: int, frame_end: int) -> list[int]:
        return self.track_ids[self.persisting_rows(frame_start, frame_end)].tolist()

    def sample_index(self, rows, frame: int) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        rel = frame - self.track_start[rows]
        if np.any((rel < 0) | (rel >= self.track_length[rows])):
            bad = rows[np.argmax((rel < 0) | (rel >= self.track_length[rows]))]
            raise TrajectoryError(f"tracer {self.track_ids[bad]} has no sample at frame {frame}")
        return self.track_offset[rows] + rel

    def positions_at(self, rows, frame: int) -> np.ndarray:
        """Positions of tracks ``rows`` (row indices, not ids) at ``frame``."""
        return self.positions[self.sample_index(rows, frame)]

    def window(self, rows, frame_start: int, frame_end: int) -> np.ndarray:
        """Positions of ``rows`` over ``[frame_start, frame_end]``, shape (frames, rows, dim)."""
        first = self.sample_index(rows, frame_start)
        self.sample_index(rows, frame_end)
        steps = np.arange(frame_end - frame_start + 1)
        return self.positions[first[None, :] + steps[:, None]]

    # -- whole-set views --------------------------------------------------

    def sample_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(ids, frames, times, positions)`` for every sample in (id, frame) order."""
        ids = np.repeat(self.track_ids, self.track_length)
        frames = np.repeat(self.track_start, self.track_length) + (
            np.arange(self.n_samples) - np.repeat(self.track_offset, self.track_length))
        times = self.frame_times[np.searchsorted(self.frame_numbers, frames)]
        return ids, frames, times, self.positions

    def records(self) -> Iterator[tuple[int, int, float, np.ndarray]]:
        ids, frames, times, pos = self.sample_arrays()
        for i in range(self.n_samples):
            yield int(ids[i]), int(frames[i]), float(times[i]), pos[i]

    def timestamps(self) -> dict[int, float]:
        return dict(zip(self.frame_numbers.tolist(), self.frame_times.tolist()))

    def subset(self, rows) -> "TrajectorySet":
        """New set keeping only track ``rows``; ids, frames and timestamps unchanged."""
        rows = np.sort(np.asarray(rows, dtype=np.int64))
        idx = np.concatenate([np.arange(self.track_offset[r], self.track_offset[r] + self.track_length[r])
                              for r in rows]) if len(rows) else np.empty(0, dtype=np.int64)
        return TrajectorySet(self.dim, self.frame_numbers, self.frame_times, self.track_ids[rows],
                             self.track_start[rows], self.track_length[rows],
                             self.positions[idx].reshape(-1, self.dim))

    def with_positions(self, positions: np.ndarray) -> "TrajectorySet":
        """Same tracks and frames, replaced sample positions (same (id, frame) order)."""
        positions = np.asarray(positions, dtype=float)
        if positions.shape != self.positions.shape:
            raise TrajectoryError(f"expected positions of shape {self.positions.shape}, got {positions.shape}")
        if not np.all(np.isfinite(positions)):
            raise TrajectoryError("positions must be finite")
        return TrajectorySet(self.dim, self.frame_numbers, self.frame_times, self.track_ids,
                             self.track_start, self.track_length, positions.copy())

    def equals(self, other: "TrajectorySet") -> bool:
        """Exact equality of samples, ids, frames and timestamps."""
        return (self.dim == other.dim
                and np.array_equal(self.frame_numbers, other.frame_numbers)
                and np.array_equal(self.frame_times, other.frame_times)
                and np.array_equal(self.track_ids, other.track_ids)
                and np.array_equal(self.track_start, other.track_start)
                and np.array_equal(self.track_length, other.track_length)
                and np.array_equal(self.positions, other.positions))


def build_trajectory_set(records: Iterable[tuple[int, int, Sequence[float]]],
                         timestamps: Sequence[float] | Mapping[int, float] | None,
                         dim: int = 2) -> TrajectorySet:
    """Build a :class:`TrajectorySet` from ``(tracer_id, frame, position)`` records.

    ``timestamps`` is either a sequence (frame ``i`` has time ``timestamps[i]``)
    or a mapping ``frame -> time``. Gapped tracks are split into new ids.
    """
    records = list(records)
    ids = np.array([r[0] for r in records], dtype=np.int64)
    frames = np.array([r[1] for r in records], dtype=np.int64)
    positions = np.array([np.asarray(r[2], dtype=float).reshape(dim) for r in records],
                         dtype=float).reshape(-1, dim)
    return TrajectorySet.from_arrays(ids, frames, positions, timestamps, dim=dim)


def frame_view(tset: TrajectorySet, frame: int) -> FrameView:
    return tset.frame_view(frame)


def persisting_ids(tset: TrajectorySet, frame_start: int, frame_end: int) -> list[int]:
    """Ids present at every frame of ``[frame_start, frame_end]``, sorted."""
    return tset.persisting_ids(frame_start, frame_end)
