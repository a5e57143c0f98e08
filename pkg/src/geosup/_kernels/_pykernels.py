"""Pure-numpy kernels. Reference behaviour for the compiled twins in ``_ckernels.pyx``."""

import numpy as np

# samples this close outside the image are round-off and snap onto the border
BORDER_TOL = 1e-9


def bilinear_sample(img, x, y):
    """Bilinearly sample ``img`` (H, W, C) at continuous ``(x, y)``.

    Returns ``(values, dv_dx, dv_dy, valid)`` with values and derivatives of
    shape (N, C). Samples outside ``[0, W-1] x [0, H-1]`` by more than
    ``BORDER_TOL`` (or non-finite) are invalid and carry zeros.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w, c = img.shape
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    n = x.shape[0]
    with np.errstate(invalid="ignore"):
        valid = (
            np.isfinite(x)
            & np.isfinite(y)
            & (x >= -BORDER_TOL)
            & (x <= w - 1 + BORDER_TOL)
            & (y >= -BORDER_TOL)
            & (y <= h - 1 + BORDER_TOL)
        )
    xv = np.clip(np.where(valid, x, 0.0), 0.0, w - 1)
    yv = np.clip(np.where(valid, y, 0.0), 0.0, h - 1)
    # the left/top neighbour is pulled back one cell on the far border so the
    # weights stay in [0, 1] and the derivative is one-sided there
    x0 = np.minimum(np.floor(xv).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yv).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = (xv - x0)[:, None]
    ay = (yv - y0)[:, None]
    i00 = img[y0, x0]
    i01 = img[y0, x1]
    i10 = img[y1, x0]
    i11 = img[y1, x1]
    top = i00 + ax * (i01 - i00)
    bot = i10 + ax * (i11 - i10)
    values = top + ay * (bot - top)
    dx = (1.0 - ay) * (i01 - i00) + ay * (i11 - i10)
    dy = bot - top
    if w == 1:
        dx = np.zeros_like(dx)
    if h == 1:
        dy = np.zeros_like(dy)
    inv = ~valid
    values[inv] = 0.0
    dx[inv] = 0.0
    dy[inv] = 0.0
    return values.reshape(n, c), dx.reshape(n, c), dy.reshape(n, c), valid


def smoothness(d, wx, wy):
    """Edge-weighted first-order smoothness and its gradient.

    ``wx`` and ``wy`` have shape (H-1, W-1); the loss is the mean over that
    interior grid of ``|d[i, j+1] - d[i, j]| wx + |d[i+1, j] - d[i, j]| wy``.
    """
    d = np.ascontiguousarray(d, dtype=np.float64)
    h, w = d.shape
    grad = np.zeros_like(d)
    if h < 2 or w < 2:
        return 0.0, grad
    n = (h - 1) * (w - 1)
    core = d[:-1, :-1]
    gx = d[:-1, 1:] - core
    gy = d[1:, :-1] - core
    loss = float(np.sum(np.abs(gx) * wx + np.abs(gy) * wy) / n)
    sx = np.sign(gx) * wx / n
    sy = np.sign(gy) * wy / n
    grad[:-1, 1:] += sx
    grad[:-1, :-1] -= sx
    grad[1:, :-1] += sy
    grad[:-1, :-1] -= sy
    return loss, grad
