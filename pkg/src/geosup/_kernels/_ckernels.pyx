# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``. Same signatures, same results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, isfinite

cnp.import_array()

cdef double BORDER_TOL = 1e-9


def bilinear_sample(img, x, y):
    cdef double[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef double[::1] ys = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], c = im.shape[2]
    cdef Py_ssize_t n = xs.shape[0]
    values_a = np.zeros((n, c), dtype=np.float64)
    dx_a = np.zeros((n, c), dtype=np.float64)
    dy_a = np.zeros((n, c), dtype=np.float64)
    valid_a = np.zeros(n, dtype=np.bool_)
    cdef double[:, ::1] values = values_a
    cdef double[:, ::1] dxs = dx_a
    cdef double[:, ::1] dys = dy_a
    cdef cnp.npy_bool[::1] valid = valid_a
    cdef Py_ssize_t i, k, x0, y0, x1, y1
    cdef Py_ssize_t xmax0 = w - 2 if w >= 2 else 0
    cdef Py_ssize_t ymax0 = h - 2 if h >= 2 else 0
    cdef double xv, yv, ax, ay, i00, i01, i10, i11, top, bot
    with nogil:
        for i in range(n):
            xv = xs[i]
            yv = ys[i]
            if not (isfinite(xv) and isfinite(yv)):
                continue
            if xv < -BORDER_TOL or xv > w - 1 + BORDER_TOL or yv < -BORDER_TOL or yv > h - 1 + BORDER_TOL:
                continue
            xv = min(max(xv, 0.0), <double>(w - 1))
            yv = min(max(yv, 0.0), <double>(h - 1))
            valid[i] = 1
            x0 = <Py_ssize_t>floor(xv)
            if x0 > xmax0:
                x0 = xmax0
            y0 = <Py_ssize_t>floor(yv)
            if y0 > ymax0:
                y0 = ymax0
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            ax = xv - x0
            ay = yv - y0
            for k in range(c):
                i00 = im[y0, x0, k]
                i01 = im[y0, x1, k]
                i10 = im[y1, x0, k]
                i11 = im[y1, x1, k]
                top = i00 + ax * (i01 - i00)
                bot = i10 + ax * (i11 - i10)
                values[i, k] = top + ay * (bot - top)
                if w > 1:
                    dxs[i, k] = (1.0 - ay) * (i01 - i00) + ay * (i11 - i10)
                if h > 1:
                    dys[i, k] = bot - top
    return values_a, dx_a, dy_a, valid_a


cdef inline double _sign(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


def smoothness(d, wx, wy):
    cdef double[:, ::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t h = dd.shape[0], w = dd.shape[1]
    grad_a = np.zeros((h, w), dtype=np.float64)
    if h < 2 or w < 2:
        return 0.0, grad_a
    cdef double[:, ::1] wxx = np.ascontiguousarray(wx, dtype=np.float64)
    cdef double[:, ::1] wyy = np.ascontiguousarray(wy, dtype=np.float64)
    cdef double[:, ::1] grad = grad_a
    cdef double n = <double>((h - 1) * (w - 1))
    cdef double total = 0.0, gx, gy, sx, sy
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h - 1):
            for j in range(w - 1):
                gx = dd[i, j + 1] - dd[i, j]
                gy = dd[i + 1, j] - dd[i, j]
                total += fabs(gx) * wxx[i, j] + fabs(gy) * wyy[i, j]
                sx = _sign(gx) * wxx[i, j] / n
                sy = _sign(gy) * wyy[i, j] / n
                grad[i, j + 1] += sx
                grad[i + 1, j] += sy
                grad[i, j] -= sx + sy
    return total / n, grad_a
