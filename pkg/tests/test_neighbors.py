import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgrflow.errors import TrajectoryError
from lgrflow.neighbors import SpatialIndex, batch_neighbors, build_index, k_nearest_persisting
from lgrflow.trajectories import TrajectorySet, build_trajectory_set


def linear_scan(positions, ids, center_row, k, allowed=None):
    """Exhaustive oracle: k nearest by (distance, id), center excluded."""
    d = np.sqrt(((positions - positions[center_row]) ** 2).sum(axis=1))
    cand = [r for r in range(len(positions))
            if r != center_row and (allowed is None or ids[r] in allowed)]
    cand.sort(key=lambda r: (d[r], ids[r]))
    return [int(ids[r]) for r in cand[:k]]


def _static_set(pos, n_frames=2, ids=None, missing_at_end=()):
    ids = np.arange(len(pos)) if ids is None else np.asarray(ids)
    recs = []
    for i, p in zip(ids, pos):
        last = n_frames - 1 if i in missing_at_end else n_frames
        recs += [(int(i), f, p) for f in range(last)]
    return build_trajectory_set(recs, np.arange(float(n_frames)))


def test_index_size_and_duplicates():
    tset = _static_set([(0, 0), (1, 0), (1, 0)])
    index = build_index(tset.frame_view(0))
    assert len(index) == 3
    res = k_nearest_persisting(index, 0, 3, tset, 0, 1)
    assert res.ids.tolist() == [1, 2]
    assert res.shortfall


def test_empty_frame_rejected():
    with pytest.raises(ValueError):
        SpatialIndex(0, np.empty(0, dtype=int), np.empty((0, 2)))


def test_collinear_examples():
    pos = [(float(x), 0.0) for x in range(5)]
    tset = _static_set(pos)
    index = build_index(tset.frame_view(0))
    assert k_nearest_persisting(index, 0, 3, tset, 0, 1).ids.tolist()[:2] == [1, 2]
    tset = _static_set(pos, missing_at_end={1})
    index = build_index(tset.frame_view(0))
    res = k_nearest_persisting(index, 0, 3, tset, 0, 1)
    assert res.ids.tolist()[:2] == [2, 3]


def test_center_absent_or_wrong_frame():
    tset = _static_set([(0, 0), (1, 0), (2, 0), (3, 0)])
    index = build_index(tset.frame_view(0))
    with pytest.raises(TrajectoryError):
        k_nearest_persisting(index, 42, 3, tset, 0, 1)
    with pytest.raises(TrajectoryError):
        k_nearest_persisting(index, 0, 3, tset, 1, 1)
    with pytest.raises(ValueError):
        k_nearest_persisting(index, 0, 2, tset, 0, 1)


def test_matches_linear_scan_500_points(rng):
    pos = rng.uniform(0, 1, size=(500, 2))
    tset = _static_set(pos)
    index = build_index(tset.frame_view(0))
    for c in range(0, 500, 7):
        res = k_nearest_persisting(index, c, 15, tset, 0, 1)
        assert res.ids.tolist() == linear_scan(pos, np.arange(500), c, 15)
        assert not res.shortfall


def test_batch_matches_linear_scan_1e4_points(rng):
    pos = rng.uniform(0, 1, size=(10_000, 2))
    ids = rng.permutation(10_000) * 3
    centers = rng.choice(10_000, 300, replace=False)
    rows = batch_neighbors(pos, centers, ids, 15)
    for i, c in enumerate(centers):
        assert ids[rows[i]].tolist() == linear_scan(pos, ids, c, 15)


def test_batch_pads_shortfall():
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    rows = batch_neighbors(pos, np.array([0]), np.arange(3), 5)
    assert rows.tolist() == [[1, 2, -1, -1, -1]]


# -- properties ------------------------------------------------------------

# integer lattice coordinates give many exact distance ties
coords = st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=2, max_size=40)


@given(coords, st.integers(3, 12), st.data())
def test_k_nearest_equals_linear_scan(pts, k, data):
    pos = np.array(pts, dtype=float)
    n = len(pos)
    ids = np.array(data.draw(st.lists(st.integers(0, 10**6), min_size=n, max_size=n, unique=True)))
    gone = set(data.draw(st.lists(st.sampled_from(ids.tolist()), max_size=n // 2)))
    center = int(data.draw(st.sampled_from([i for i in ids.tolist() if i not in gone] or [int(ids[0])])))
    gone.discard(center)
    tset = _static_set(pos, ids=ids, missing_at_end=gone)
    view = tset.frame_view(0)
    res = k_nearest_persisting(build_index(view), center, k, tset, 0, 1)
    allowed = set(tset.persisting_ids(0, 1))
    c_row = int(np.flatnonzero(view.ids == center)[0])
    assert res.ids.tolist() == linear_scan(view.positions, view.ids, c_row, k, allowed)
    assert center not in res.ids.tolist()
    assert len(res.ids) <= k
    assert np.all(np.diff(res.distances) >= 0)
    assert res.shortfall == (len(res.ids) < k)


@given(coords, st.integers(3, 12), st.data())
def test_batch_equals_linear_scan(pts, k, data):
    pos = np.array(pts, dtype=float)
    n = len(pos)
    ids = np.array(data.draw(st.lists(st.integers(0, 10**6), min_size=n, max_size=n, unique=True)))
    centers = np.arange(n)
    rows = batch_neighbors(pos, centers, ids, k)
    for c in centers:
        got = [int(ids[r]) for r in rows[c] if r >= 0]
        assert got == linear_scan(pos, ids, c, k)
