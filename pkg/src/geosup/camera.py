"""Pinhole back-projection and perspective projection.

Pixel convention: integer pixel ``(x, y)`` is the pixel centre at continuous
coordinate ``(x, y)``; there is no half-pixel offset anywhere in the package.
``x`` indexes columns and ``y`` indexes rows, so ``depth[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BehindCameraError, InvalidInputError, ValidationError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew calibration matrix plus image size.

    Parameters
    ----------
    fx, fy : float
        Focal lengths in pixels.
    cx, cy : float
        Principal point in pixels.
    width, height : int
        Image size in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (np.isfinite(self.fx) and self.fx > 0 and np.isfinite(self.fy) and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValidationError("principal point must be finite")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValidationError("width and height must be integers")
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"image size must be >= 1, got {self.width}x{self.height}")

    @cached_property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @cached_property
    def K_inv(self) -> np.ndarray:
        # closed form keeps K @ K_inv within a few ulps of identity
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.height), int(self.width))

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by ``factor`` in both directions."""
        return CameraIntrinsics(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            max(1, int(round(self.width * factor))),
            max(1, int(round(self.height * factor))),
        )


def pixel_ray(x, y, intr: CameraIntrinsics) -> np.ndarray:
    """Return ``K^-1 [x, y, 1]^T``; the third component is exactly 1."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rx = (x - intr.cx) / intr.fx
    ry = (y - intr.cy) / intr.fy
    return np.stack([rx, ry, np.ones_like(rx)], axis=-1)


def ray_grid(intr: CameraIntrinsics) -> np.ndarray:
    """Rays for every pixel centre, shape ``(height, width, 3)``."""
    ys, xs = np.mgrid[0 : intr.height, 0 : intr.width]
    return pixel_ray(xs, ys, intr)


def back_project(pixel, depth: float, intr: CameraIntrinsics) -> np.ndarray:
    """Back-project one pixel at depth ``Z`` (metres) to a camera-frame point.

    Raises
    ------
    InvalidInputError
        If the depth is not positive or the pixel lies outside the image.
    """
    x, y = float(pixel[0]), float(pixel[1])
    z = float(depth)
    if not (np.isfinite(z) and z > 0):
        raise InvalidInputError(f"depth must be positive, got {depth}")
    if not (0 <= x <= intr.width - 1 and 0 <= y <= intr.height - 1):
        raise InvalidInputError(f"pixel ({x}, {y}) outside {intr.width}x{intr.height} image")
    ray = pixel_ray(x, y, intr)
    point = ray * z
    point[2] = z
    return point


def project(point, intr: CameraIntrinsics) -> np.ndarray:
    """Perspective projection of camera-frame point(s) to pixel coordinates.

    Accepts a single 3-vector or an ``(..., 3)`` array. Raises
    ``BehindCameraError`` if any point has ``Z <= 0``.
    """
    p = np.asarray(point, dtype=np.float64)
    z = p[..., 2]
    if np.any(~(z > 0)):
        raise BehindCameraError("point has non-positive depth")
    u = intr.fx * p[..., 0] / z + intr.cx
    v = intr.fy * p[..., 1] / z + intr.cy
    return np.stack([u, v], axis=-1)


@dataclass(frozen=True)
class BackProjection:
    """Points for the masked pixels of a depth map.

    ``points[i]`` comes from ``pixels[i]`` (``(row, col)``), in row-major order.
    ``skipped`` counts masked pixels dropped for invalid depth.
    """

    points: np.ndarray
    pixels: np.ndarray
    rays: np.ndarray
    depths: np.ndarray
    skipped: int

    def __len__(self):
        return len(self.points)


def valid_depth(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth)
    with np.errstate(invalid="ignore"):
        return np.isfinite(depth) & (depth > 0)


def back_project_map(depth: np.ndarray, intr: CameraIntrinsics, mask=None) -> BackProjection:
    """Stack back-projected points for every masked pixel with valid depth.

    Parameters
    ----------
    depth : ndarray, shape (H, W)
        Depth in metres; non-positive or non-finite entries are invalid.
    mask : ndarray of bool, optional
        Pixel subset; defaults to the full image.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != intr.shape:
        raise InvalidInputError(f"depth shape {depth.shape} does not match intrinsics {intr.shape}")
    if mask is None:
        mask = np.ones(depth.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != depth.shape:
        raise InvalidInputError("mask shape does not match depth")
    good = mask & valid_depth(depth)
    skipped = int(np.count_nonzero(mask) - np.count_nonzero(good))
    rows, cols = np.nonzero(good)
    rays = pixel_ray(cols, rows, intr)
    z = depth[rows, cols]
    points = rays * z[:, None]
    return BackProjection(points, np.stack([rows, cols], axis=-1), rays, z, skipped)
