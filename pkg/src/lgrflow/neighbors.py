"""k-nearest-neighbor queries over one frame's tracers.

The index is a :class:`scipy.spatial.cKDTree`; the persistence filter and the
``(distance, id)`` ordering are applied on top so results match an exhaustive
scan exactly, ties included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import TrajectoryError
from .trajectories import FrameView, TrajectorySet

__all__ = [
    "SpatialIndex",
    "NeighborResult",
    "build_index",
    "k_nearest_persisting",
    "batch_neighbors",
]


class SpatialIndex:
    """Immutable k-d tree over the tracers of a single frame."""

    def __init__(self, frame: int, ids: np.ndarray, positions: np.ndarray):
        positions = np.asarray(positions, dtype=float)
        if len(positions) == 0:
            raise TrajectoryError(f"cannot index frame {frame}: no tracers present")
        self.frame = int(frame)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.positions = positions
        self._tree = cKDTree(positions)
        self._row = {int(i): r for r, i in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def row_of(self, tracer_id: int) -> int:
        try:
            return self._row[int(tracer_id)]
        except KeyError:
            raise TrajectoryError(f"tracer {tracer_id} is not present at frame {self.frame}") from None

    def query(self, points, k: int, workers: int = 1):
        """Raw tree query: ``(distances, rows)``; missing slots have row ``len(self)``."""
        return self._tree.query(points, k=k, workers=workers)


def build_index(view: FrameView) -> SpatialIndex:
    return SpatialIndex(view.frame, view.ids, view.positions)


@dataclass(frozen=True)
class NeighborResult:
    center: int
    ids: np.ndarray
    distances: np.ndarray
    shortfall: bool


def _distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.sqrt(((points - center) ** 2).sum(axis=-1))


def k_nearest_persisting(index: SpatialIndex, center: int, k: int, tset: TrajectorySet,
                         frame_start: int, frame_end: int) -> NeighborResult:
    """The ``k`` tracers nearest to ``center`` at ``frame_start`` that persist to ``frame_end``.

    The center itself is never returned. Results are ordered by distance,
    ties broken by id. If fewer than ``k`` candidates persist, all of them are
    returned and ``shortfall`` is set.
    """
    if index.frame != frame_start:
        raise TrajectoryError(f"index built for frame {index.frame}, query asks for frame {frame_start}")
    if k < tset.dim + 1:
        raise ValueError(f"k must be at least d+1={tset.dim + 1}, got {k}")
    c_row = index.row_of(center)
    c_pos = index.positions[c_row]
    keep = np.isin(index.ids, tset.persisting_ids(frame_start, frame_end))
    keep[c_row] = False
    n = len(index)

    kq = min(n, k + 2)
    while True:
        dist, rows = index.query(c_pos, kq)
        rows = np.atleast_1d(rows)
        dist = np.atleast_1d(dist)
        found = rows < n
        rows, dist = rows[found], dist[found]
        cand = rows[keep[rows]]
        if len(cand) >= k:
            d_k = np.sort(dist[keep[rows]])[k - 1]
            # every point at distance <= d_k must be in the retrieved set
            if kq >= n or dist[-1] > d_k:
                break
        elif kq >= n:
            break
        kq = min(n, 2 * kq)

    d = _distances(index.positions[cand], c_pos)
    ids = index.ids[cand]
    order = np.lexsort((ids, d))[:k]
    return NeighborResult(int(center), ids[order], d[order], bool(len(order) < k))


def batch_neighbors(positions: np.ndarray, center_rows: np.ndarray, ids: np.ndarray, k: int,
                    tree: cKDTree | None = None, workers: int = 1) -> np.ndarray:
    """Neighbor rows for many centers at once, shape ``(len(center_rows), k)``.

    All ``positions`` are candidates (callers pass only persisting tracers).
    Rows are ordered by ``(distance, id)`` and padded with ``-1`` on shortfall.
    Centers whose k-th and (k+1)-th candidates tie in distance are resolved
    by an exact per-center scan, so the output equals the exhaustive result.
    """
    positions = np.asarray(positions, dtype=float)
    center_rows = np.asarray(center_rows, dtype=np.int64)
    n = len(positions)
    m = len(center_rows)
    out = np.full((m, k), -1, dtype=np.intp)
    if m == 0 or n <= 1:
        return out
    if tree is None:
        tree = cKDTree(positions)
    kq = min(n, k + 2)
    dist, rows = tree.query(positions[center_rows], k=kq, workers=workers)
    dist = dist.reshape(m, kq)
    rows = rows.reshape(m, kq)
    is_self = rows == center_rows[:, None]
    # drop self (or the farthest slot when self was not retrieved, e.g. duplicates)
    drop = np.where(is_self.any(axis=1), np.argmax(is_self, axis=1), kq - 1)
    keep = np.ones((m, kq), dtype=bool)
    keep[np.arange(m), drop] = False
    rows = rows[keep].reshape(m, kq - 1)
    dist = dist[keep].reshape(m, kq - 1)
    valid = rows < n
    safe = np.where(valid, rows, 0)
    id_key = np.where(valid, ids[safe], np.iinfo(np.int64).max)
    dist = np.where(valid, dist, np.inf)
    order = _rowwise_lexsort(dist, id_key)
    rows = np.take_along_axis(rows, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    valid = np.take_along_axis(valid, order, axis=1)
    kk = min(k, kq - 1)
    out[:, :kk] = np.where(valid[:, :kk], rows[:, :kk], -1)

    # exact fallback for boundary ties and for duplicates hiding the center
    if kq - 1 > k:
        tie = np.isfinite(dist[:, k - 1]) & (dist[:, k - 1] == dist[:, k])
    else:
        tie = np.zeros(m, dtype=bool)
    tie |= ~is_self.any(axis=1) & (kq < n)
    for i in np.flatnonzero(tie):
        c = center_rows[i]
        d = _distances(positions, positions[c])
        d[c] = np.inf
        cand = np.flatnonzero(np.isfinite(d))
        order_i = np.lexsort((ids[cand], d[cand]))[:k]
        out[i, :] = -1
        out[i, :len(order_i)] = cand[order_i]
    return out


def _rowwise_lexsort(dist: np.ndarray, id_key: np.ndarray) -> np.ndarray:
    # sort each row by distance, then id
    by_id = np.argsort(id_key, axis=1, kind="stable")
    d_sorted = np.take_along_axis(dist, by_id, axis=1)
    by_dist = np.argsort(d_sorted, axis=1, kind="stable")
    return np.take_along_axis(by_id, by_dist, axis=1)
