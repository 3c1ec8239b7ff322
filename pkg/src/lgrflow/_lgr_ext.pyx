# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels for planar Lagrangian gradient regression.

Mirrors :mod:`lgrflow._kernels_py` exactly; see there for the contract.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, NAN

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_INSUFFICIENT = 1
    STATUS_SINGULAR = 2


def regress_batch(const double[:, ::1] pos0, const double[:, ::1] pos1,
                  const Py_ssize_t[::1] centers, const Py_ssize_t[:, ::1] neighbors,
                  double s, double gamma, double rcond_tol, Py_ssize_t min_neighbors):
    cdef Py_ssize_t m = centers.shape[0]
    cdef Py_ssize_t k = neighbors.shape[1]
    out_np = np.empty((m, 2, 2), dtype=np.float64)
    n_used_np = np.empty(m, dtype=np.intp)
    status_np = np.empty(m, dtype=np.int8)
    cdef double[:, :, ::1] out = out_np
    cdef Py_ssize_t[::1] n_used = n_used_np
    cdef signed char[::1] status = status_np

    cdef Py_ssize_t i, j, c, r, n
    cdef double inv2s2 = 1.0 / (2.0 * s * s)
    cdef double cx0, cy0, cx1, cy1, dx0, dy0, dx1, dy1, w
    cdef double nxx, nxy, nyy, bxx, bxy, byx, byy, reg, tr, det, disc, lmax, lmin

    with nogil:
        for i in range(m):
            c = centers[i]
            cx0 = pos0[c, 0]
            cy0 = pos0[c, 1]
            cx1 = pos1[c, 0]
            cy1 = pos1[c, 1]
            nxx = 0.0; nxy = 0.0; nyy = 0.0
            bxx = 0.0; bxy = 0.0; byx = 0.0; byy = 0.0
            n = 0
            for j in range(k):
                r = neighbors[i, j]
                if r < 0:
                    continue
                dx0 = pos0[r, 0] - cx0
                dy0 = pos0[r, 1] - cy0
                dx1 = pos1[r, 0] - cx1
                dy1 = pos1[r, 1] - cy1
                w = exp(-(dx0 * dx0 + dy0 * dy0) * inv2s2)
                nxx = nxx + w * dx0 * dx0
                nxy = nxy + w * dx0 * dy0
                nyy = nyy + w * dy0 * dy0
                bxx = bxx + w * dx1 * dx0
                bxy = bxy + w * dx1 * dy0
                byx = byx + w * dy1 * dx0
                byy = byy + w * dy1 * dy0
                n = n + 1
            n_used[i] = n
            if n < min_neighbors:
                status[i] = STATUS_INSUFFICIENT
                out[i, 0, 0] = NAN; out[i, 0, 1] = NAN
                out[i, 1, 0] = NAN; out[i, 1, 1] = NAN
                continue
            reg = gamma * n
            nxx = nxx + reg
            nyy = nyy + reg
            tr = nxx + nyy
            det = nxx * nyy - nxy * nxy
            disc = sqrt(0.25 * (nxx - nyy) * (nxx - nyy) + nxy * nxy)
            lmax = 0.5 * tr + disc
            lmin = det / lmax if lmax > 0.0 else 0.0
            if not (lmax > 0.0) or not (lmin > rcond_tol * lmax):
                status[i] = STATUS_SINGULAR
                out[i, 0, 0] = NAN; out[i, 0, 1] = NAN
                out[i, 1, 0] = NAN; out[i, 1, 1] = NAN
                continue
            status[i] = STATUS_OK
            # B @ inv(N), inv(N) = [[nyy, -nxy], [-nxy, nxx]] / det
            out[i, 0, 0] = (bxx * nyy - bxy * nxy) / det
            out[i, 0, 1] = (bxy * nxx - bxx * nxy) / det
            out[i, 1, 0] = (byx * nyy - byy * nxy) / det
            out[i, 1, 1] = (byy * nxx - byx * nxy) / det
    return out_np, n_used_np, status_np


def compose_batch(double[:, :, ::1] acc, const double[:, :, ::1] step, const Py_ssize_t[::1] rows):
    """In place: ``acc[rows[i]] = step[i] @ acc[rows[i]]`` (later step on the left)."""
    cdef Py_ssize_t i, r
    cdef double a00, a01, a10, a11
    with nogil:
        for i in range(rows.shape[0]):
            r = rows[i]
            a00 = acc[r, 0, 0]; a01 = acc[r, 0, 1]
            a10 = acc[r, 1, 0]; a11 = acc[r, 1, 1]
            acc[r, 0, 0] = step[i, 0, 0] * a00 + step[i, 0, 1] * a10
            acc[r, 0, 1] = step[i, 0, 0] * a01 + step[i, 0, 1] * a11
            acc[r, 1, 0] = step[i, 1, 0] * a00 + step[i, 1, 1] * a10
            acc[r, 1, 1] = step[i, 1, 0] * a01 + step[i, 1, 1] * a11
