"""Edge-aware first-order smoothness on disparity or inverse depth."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .warp import as_image

DEFAULT_EDGE_WEIGHT = 1.0


def edge_weights(img, edge_weight: float = DEFAULT_EDGE_WEIGHT):
    """``exp(-edge_weight |dI|)`` for forward differences on the (H-1, W-1) interior.

    Image gradients are averaged over channels.
    """
    a = as_image(img)
    core = a[:-1, :-1]
    ix = np.abs(a[:-1, 1:] - core).mean(axis=2)
    iy = np.abs(a[1:, :-1] - core).mean(axis=2)
    return np.exp(-edge_weight * ix), np.exp(-edge_weight * iy)


def smoothness_grad(disp, img, edge_weight: float = DEFAULT_EDGE_WEIGHT, weights=None):
    """Smoothness loss and its gradient with respect to ``disp``.

    ``weights`` may carry precomputed ``edge_weights`` output for a fixed image.
    """
    d = np.asarray(disp, dtype=np.float64)
    if d.ndim != 2:
        raise InvalidInputError("disparity must be 2-D")
    if weights is None:
        if as_image(img).shape[:2] != d.shape:
            raise InvalidInputError(f"dimension mismatch {d.shape} vs {np.shape(img)[:2]}")
        weights = edge_weights(img, edge_weight)
    wx, wy = weights
    if wx.shape != (max(d.shape[0] - 1, 0), max(d.shape[1] - 1, 0)):
        raise InvalidInputError("edge weights do not match disparity shape")
    return _kernels.smoothness(d, wx, wy)


def loss_smoothness(disp, img, edge_weight: float = DEFAULT_EDGE_WEIGHT) -> float:
    """Mean of ``|d_x d| exp(-a |d_x I|) + |d_y d| exp(-a |d_y I|)`` with forward differences.

    The last row and column, where a forward difference is undefined, are excluded.
    """
    return smoothness_grad(disp, img, edge_weight)[0]
