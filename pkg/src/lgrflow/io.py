"""Delimited-text file formats and point homographies.

Formats (comma-separated, UTF-8, mandatory header, one record per line):

* trajectories: ``tracer_id,frame,t,x,y``
* detections:   ``frame,t,x,y``
* metric samples: ``tracer_id,x,y,metric,value,interval_start,interval_end``

Floats are written with 17 significant digits, so reading back a written
file reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import os
from collections.abc import Sequence

import numpy as np

from .errors import FormatError, LGRError
from .metrics import MetricSample
from .tracking import DetectionFrame
from .trajectories import TrajectorySet

__all__ = [
    "TRAJECTORY_COLUMNS",
    "DETECTION_COLUMNS",
    "METRIC_COLUMNS",
    "read_trajectories",
    "write_trajectories",
    "read_detections",
    "write_detections",
    "read_metric_samples",
    "write_metric_samples",
    "apply_homography",
    "parse_homography",
]

TRAJECTORY_COLUMNS = ("tracer_id", "frame", "t", "x", "y")
DETECTION_COLUMNS = ("frame", "t", "x", "y")
METRIC_COLUMNS = ("tracer_id", "x", "y", "metric", "value", "interval_start", "interval_end")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _rows(path, columns: Sequence[str]):
    """Yield ``(line_number, fields)`` after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            fields = [c.strip() for c in row]
            if header is None:
                header = fields
                if tuple(header) != tuple(columns):
                    missing = [c for c in columns if c not in header]
                    detail = f"missing column(s) {missing}" if missing else "wrong column order"
                    raise FormatError(f"bad header {header}: expected {list(columns)} ({detail})",
                                      line=reader.line_num, path=path)
                continue
            if len(fields) != len(columns):
                raise FormatError(f"expected {len(columns)} fields, got {len(fields)}",
                                  line=reader.line_num, path=path)
            yield reader.line_num, fields
        if header is None:
            raise FormatError(f"missing header; expected {list(columns)}", line=1, path=path)


def _parse(conv, text: str, name: str, line: int, path):
    try:
        v = conv(text)
    except ValueError:
        raise FormatError(f"cannot parse {name}={text!r}", line=line, path=path) from None
    if conv is float and not np.isfinite(v):
        raise FormatError(f"non-finite {name}={text!r}", line=line, path=path)
    return v


def _check_time(times: dict, frame: int, t: float, line: int, path) -> None:
    seen = times.setdefault(frame, t)
    if seen != t:
        raise FormatError(f"inconsistent timestamp for frame {frame}: {t!r} vs {seen!r}",
                          line=line, path=path)


def read_trajectories(path) -> TrajectorySet:
    ids, frames, pos = [], [], []
    times: dict[int, float] = {}
    for line, f in _rows(path, TRAJECTORY_COLUMNS):
        tid = _parse(int, f[0], "tracer_id", line, path)
        fr = _parse(int, f[1], "frame", line, path)
        t = _parse(float, f[2], "t", line, path)
        x = _parse(float, f[3], "x", line, path)
        y = _parse(float, f[4], "y", line, path)
        _check_time(times, fr, t, line, path)
        ids.append(tid)
        frames.append(fr)
        pos.append((x, y))
    try:
        return TrajectorySet.from_arrays(ids, frames, np.array(pos, dtype=float).reshape(-1, 2), times)
    except LGRError as exc:
        raise FormatError(str(exc), path=path) from exc


def write_trajectories(tset: TrajectorySet, path) -> None:
    ids, frames, times, pos = tset.sample_arrays()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(tset.n_samples):
            w.writerow((int(ids[i]), int(frames[i]), _fmt(times[i]), _fmt(pos[i, 0]), _fmt(pos[i, 1])))


def read_detections(path) -> list[DetectionFrame]:
    """Detections grouped into frames, sorted by frame index."""
    groups: dict[int, list[tuple[float, float]]] = {}
    times: dict[int, float] = {}
    for line, f in _rows(path, DETECTION_COLUMNS):
        fr = _parse(int, f[0], "frame", line, path)
        t = _parse(float, f[1], "t", line, path)
        x = _parse(float, f[2], "x", line, path)
        y = _parse(float, f[3], "y", line, path)
        _check_time(times, fr, t, line, path)
        groups.setdefault(fr, []).append((x, y))
    out = [DetectionFrame(fr, times[fr], np.array(groups[fr], dtype=float)) for fr in sorted(groups)]
    for a, b in zip(out[:-1], out[1:]):
        if not b.time > a.time:
            raise FormatError(f"timestamps must increase with frame: frame {a.frame} t={a.time!r}, "
                              f"frame {b.frame} t={b.time!r}", path=path)
    return out


def write_detections(frames: Sequence[DetectionFrame], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_COLUMNS)
        for fr in sorted(frames, key=lambda f: f.frame):
            for x, y in fr.positions:
                w.writerow((fr.frame, _fmt(fr.time), _fmt(x), _fmt(y)))


def read_metric_samples(path) -> list[MetricSample]:
    out = []
    for line, f in _rows(path, METRIC_COLUMNS):
        out.append(MetricSample(
            _parse(int, f[0], "tracer_id", line, path),
            (_parse(float, f[1], "x", line, path), _parse(float, f[2], "y", line, path)),
            _parse(float, f[4], "value", line, path),
            f[3],
            (_parse(int, f[5], "interval_start", line, path), _parse(int, f[6], "interval_end", line, path)),
        ))
    return out


def write_metric_samples(samples: Sequence[MetricSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for s in samples:
            if "," in s.metric or "\n" in s.metric:
                raise LGRError(f"metric name {s.metric!r} cannot contain commas or newlines")
            w.writerow((s.tracer_id, _fmt(s.position[0]), _fmt(s.position[1]), s.metric,
                        _fmt(s.value), s.interval[0], s.interval[1]))


# -- homography ----------------------------------------------------------

def parse_homography(values) -> np.ndarray:
    """3x3 matrix from 9 numbers (row-major) or a 3x3 array; must be invertible."""
    if isinstance(values, str):
        values = [v for v in values.replace(",", " ").split()]
    h = np.asarray(values, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(h)):
        raise LGRError("homography entries must be finite")
    if abs(np.linalg.det(h)) <= 1e-12:
        raise LGRError(f"homography is not invertible (det={np.linalg.det(h):.3g})")
    return h


def _map_points(points: np.ndarray, h: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    w = h[2, 0] * x + h[2, 1] * y + h[2, 2]
    bad = np.abs(w) <= 1e-12
    if bad.any():
        raise LGRError(f"point {points[np.argmax(bad)].tolist()} maps to infinity under the homography")
    return np.stack([(h[0, 0] * x + h[0, 1] * y + h[0, 2]) / w,
                     (h[1, 0] * x + h[1, 1] * y + h[1, 2]) / w], axis=1)


def apply_homography(obj, h):
    """Map a TrajectorySet, a list of DetectionFrames, or an (n, 2) array through ``h``."""
    h = parse_homography(h)
    if isinstance(obj, TrajectorySet):
        return obj.with_positions(_map_points(obj.positions, h))
    if isinstance(obj, np.ndarray):
        return _map_points(obj.reshape(-1, 2).astype(float), h)
    return [DetectionFrame(f.frame, f.time, _map_points(f.positions, h)) for f in obj]


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
