"""Pure-numpy batch kernels; the reference twin of the compiled ``_lgr_ext``.

``regress_batch`` solves the kernel-weighted least-squares problem for many
center tracers at once (planar case). For center ``i`` with neighbor rows
``neighbors[i]`` (``-1`` marks an empty slot) it forms displacements from the
center at both frames, Gaussian weights on the start-frame displacements, and
returns ``B @ inv(N)`` with ``B = sum w dx1 dx0^T`` and
``N = sum w dx0 dx0^T + gamma * n * I``.

Status codes: 0 ok, 1 fewer than ``min_neighbors`` neighbors, 2 singular
normal matrix (``lambda_min <= rcond_tol * lambda_max``). Failed entries are NaN.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_INSUFFICIENT = 1
STATUS_SINGULAR = 2


def regress_batch(pos0, pos1, centers, neighbors, s, gamma, rcond_tol, min_neighbors):
    pos0 = np.asarray(pos0, dtype=float)
    pos1 = np.asarray(pos1, dtype=float)
    centers = np.asarray(centers, dtype=np.intp)
    neighbors = np.asarray(neighbors, dtype=np.intp)
    m = len(centers)
    valid = neighbors >= 0
    safe = np.where(valid, neighbors, 0)
    d0 = pos0[safe] - pos0[centers][:, None, :]
    d1 = pos1[safe] - pos1[centers][:, None, :]
    w = np.exp(-(d0[..., 0] * d0[..., 0] + d0[..., 1] * d0[..., 1]) * (1.0 / (2.0 * s * s)))
    w = np.where(valid, w, 0.0)
    n = valid.sum(axis=1)

    wx0, wy0 = w * d0[..., 0], w * d0[..., 1]
    nxx = (wx0 * d0[..., 0]).sum(axis=1) + gamma * n
    nxy = (wx0 * d0[..., 1]).sum(axis=1)
    nyy = (wy0 * d0[..., 1]).sum(axis=1) + gamma * n
    bxx = (d1[..., 0] * wx0).sum(axis=1)
    bxy = (d1[..., 0] * wy0).sum(axis=1)
    byx = (d1[..., 1] * wx0).sum(axis=1)
    byy = (d1[..., 1] * wy0).sum(axis=1)

    tr = nxx + nyy
    det = nxx * nyy - nxy * nxy
    disc = np.sqrt(0.25 * (nxx - nyy) ** 2 + nxy * nxy)
    lmax = 0.5 * tr + disc
    with np.errstate(divide="ignore", invalid="ignore"):
        lmin = np.where(lmax > 0, det / lmax, 0.0)
        out = np.empty((m, 2, 2))
        out[:, 0, 0] = (bxx * nyy - bxy * nxy) / det
        out[:, 0, 1] = (bxy * nxx - bxx * nxy) / det
        out[:, 1, 0] = (byx * nyy - byy * nxy) / det
        out[:, 1, 1] = (byy * nxx - byx * nxy) / det

    status = np.zeros(m, dtype=np.int8)
    singular = ~((lmax > 0) & (lmin > rcond_tol * lmax))
    status[singular] = STATUS_SINGULAR
    status[n < min_neighbors] = STATUS_INSUFFICIENT
    out[status != STATUS_OK] = np.nan
    return out, n.astype(np.intp), status


def compose_batch(acc, step, rows):
    rows = np.asarray(rows, dtype=np.intp)
    acc[rows] = step @ acc[rows]
