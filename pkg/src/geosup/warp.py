"""Photometric view-synthesis losses built on bilinear sampling.

Stereo uses the disparity sign ``I_R(x + D_L(x, y), y)`` literally, so a
synthetic right view consistent with it has its camera centre at ``-baseline``
along ``x`` (see ``synthetic.render_stereo_pair``). All losses are L1 (summed
over channels) averaged over valid pixels only; samples falling outside the
source image or behind its camera are excluded, not clamped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import CameraIntrinsics, ray_grid
from .errors import InvalidInputError
from .gravity import validate_rotation


def as_image(img, name: str = "image") -> np.ndarray:
    """Return ``img`` as a float (H, W, C) array with C in {1, 3}."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3) or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must be (H, W) or (H, W, 1|3), got shape {np.shape(img)}")
    return a


def _check_same(shape_a, shape_b, what):
    if tuple(shape_a) != tuple(shape_b):
        raise InvalidInputError(f"{what}: dimension mismatch {tuple(shape_a)} vs {tuple(shape_b)}")


def sample_bilinear(img, x, y):
    """Sample ``img`` at continuous coordinates; returns ``(values, valid)``.

    Scalars give a ``(C,)`` value and a bool. Coordinates outside
    ``[0, W-1] x [0, H-1]`` are invalid and sample to zero.
    """
    a = as_image(img)
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64))
    xs, ys = np.broadcast_arrays(xs, ys)
    vals, _, _, valid = _kernels.bilinear_sample(a, xs.ravel(), ys.ravel())
    if scalar:
        return vals[0], bool(valid[0])
    return vals.reshape(xs.shape + (a.shape[2],)), valid.reshape(xs.shape)


def _disparity_grid(shape, disparity):
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return xs + disparity, ys


def stereo_loss_grad(I_L, I_R, D_L):
    """Stereo view-synthesis loss, its gradient w.r.t. ``D_L``, and the valid mask.

    Non-finite disparities are invalid pixels.
    """
    left = as_image(I_L, "I_L")
    right = as_image(I_R, "I_R")
    D = np.asarray(D_L, dtype=np.float64)
    _check_same(left.shape, right.shape, "stereo images")
    _check_same(left.shape[:2], D.shape, "disparity vs image")
    h, w, c = left.shape
    xs, ys = _disparity_grid((h, w), D)
    vals, gx, _, valid = _kernels.bilinear_sample(right, xs.ravel(), ys.ravel())
    n = int(np.count_nonzero(valid))
    grad = np.zeros(h * w)
    if n == 0:
        return 0.0, grad.reshape(h, w), valid.reshape(h, w)
    resid = left.reshape(-1, c) - vals
    absres = np.abs(resid).sum(axis=1)
    loss = float(absres[valid].sum() / n)
    g = -(np.sign(resid) * gx).sum(axis=1) / n
    grad[valid] = g[valid]
    return loss, grad.reshape(h, w), valid.reshape(h, w)


def loss_view_synthesis_stereo(I_L, I_R, D_L) -> float:
    """Mean L1 difference between ``I_L(x, y)`` and ``I_R(x + D_L(x, y), y)``."""
    return stereo_loss_grad(I_L, I_R, D_L)[0]


def loss_lr_consistency(D_L, D_R) -> float:
    """Mean ``|D_L(x, y) - D_R(x + D_L(x, y), y)|`` over valid pixels."""
    dl = np.asarray(D_L, dtype=np.float64)
    dr = np.asarray(D_R, dtype=np.float64)
    if dl.ndim != 2:
        raise InvalidInputError("disparity maps must be 2-D")
    _check_same(dl.shape, dr.shape, "disparity maps")
    xs, ys = _disparity_grid(dl.shape, dl)
    dr_img = np.where(np.isfinite(dr), dr, 0.0)[:, :, None]
    vals, _, _, valid = _kernels.bilinear_sample(dr_img, xs.ravel(), ys.ravel())
    # a sample touching an invalid right-disparity pixel is itself invalid
    bad = (~np.isfinite(dr)).astype(np.float64)[:, :, None]
    touched, _, _, _ = _kernels.bilinear_sample(bad, xs.ravel(), ys.ravel())
    valid &= touched[:, 0] == 0
    n = int(np.count_nonzero(valid))
    if n == 0:
        return 0.0
    diff = np.abs(dl.ravel() - vals[:, 0])
    return float(diff[valid].sum() / n)


@dataclass(frozen=True)
class Pose:
    """Rigid transform taking reference-camera points into another camera: ``X' = R X + t``.

    ``metric=False`` marks a translation known only up to scale.
    """

    rotation: np.ndarray
    translation: np.ndarray
    metric: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rotation", validate_rotation(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def scaled(self, factor: float) -> "Pose":
        return Pose(self.rotation, self.translation * factor, self.metric)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class TemporalWindow:
    reference: int
    neighbors: tuple[int, ...]

    def __post_init__(self):
        if len(self.neighbors) < 1:
            raise InvalidInputError("temporal window needs at least one neighbour")
        if self.reference in self.neighbors:
            raise InvalidInputError("reference frame cannot be its own neighbour")


def _transform_project(depth, pose: Pose, intr: CameraIntrinsics, rays=None):
    z = np.asarray(depth, dtype=np.float64)
    if rays is None:
        rays = ray_grid(intr)
    with np.errstate(invalid="ignore"):
        good = np.isfinite(z) & (z > 0)
    zz = np.where(good, z, 1.0)
    rr = rays @ pose.rotation.T
    pts = rr * zz[..., None] + pose.translation
    front = good & (pts[..., 2] > 0)
    zc = np.where(front, pts[..., 2], 1.0)
    u = intr.fx * pts[..., 0] / zc + intr.cx
    v = intr.fy * pts[..., 1] / zc + intr.cy
    u = np.where(front, u, np.nan)
    v = np.where(front, v, np.nan)
    return u, v, pts, rr, front


def warp_monocular(I_src, depth, pose: Pose, intr: CameraIntrinsics):
    """Warp a source frame into the reference view.

    Each reference pixel is back-projected with ``depth``, moved by ``pose``,
    projected and bilinearly sampled in ``I_src``. Returns ``(warped, valid)``;
    invalid pixels (bad depth, behind camera, out of view) hold zeros.
    """
    src = as_image(I_src, "I_src")
    _check_same(src.shape[:2], np.shape(depth), "source image vs depth")
    _check_same(np.shape(depth), intr.shape, "depth vs intrinsics")
    u, v, _, _, _ = _transform_project(depth, pose, intr)
    vals, _, _, valid = _kernels.bilinear_sample(src, u.ravel(), v.ravel())
    h, w, c = src.shape
    return vals.reshape(h, w, c), valid.reshape(h, w)


def _mono_term(ref, src, depth, pose, intr, rays, need_grad):
    h, w, c = ref.shape
    u, v, pts, rr, front = _transform_project(depth, pose, intr, rays)
    vals, gx, gy, valid = _kernels.bilinear_sample(src, u.ravel(), v.ravel())
    n = int(np.count_nonzero(valid))
    if n == 0:
        return 0.0, np.zeros((h, w)) if need_grad else None
    resid = vals - ref.reshape(-1, c)
    loss = float(np.abs(resid).sum(axis=1)[valid].sum() / n)
    if not need_grad:
        return loss, None
    zc = np.where(front, pts[..., 2], 1.0).ravel()
    px, py = pts[..., 0].ravel(), pts[..., 1].ravel()
    dx, dy, dz = (rr[..., i].ravel() for i in range(3))
    du = intr.fx * (dx * zc - px * dz) / zc**2
    dv = intr.fy * (dy * zc - py * dz) / zc**2
    sgn = np.sign(resid)
    g = (sgn * (gx * du[:, None] + gy * dv[:, None])).sum(axis=1) / n
    g[~valid] = 0.0
    return loss, g.reshape(h, w)


def mono_loss_grad(reference, neighbors, depth, poses, intr: CameraIntrinsics, rays=None, need_grad=True):
    """Monocular reprojection loss and its gradient with respect to depth.

    ``neighbors`` and ``poses`` are parallel sequences; each pose maps the
    reference camera into that neighbour's camera. Each neighbour contributes
    its mean over valid pixels; contributions are averaged over neighbours.
    """
    ref = as_image(reference, "reference")
    depth = np.asarray(depth, dtype=np.float64)
    _check_same(ref.shape[:2], depth.shape, "reference image vs depth")
    _check_same(depth.shape, intr.shape, "depth vs intrinsics")
    neighbors = list(neighbors)
    poses = list(poses)
    if len(neighbors) < 1:
        raise InvalidInputError("need at least one neighbouring frame")
    if len(poses) != len(neighbors):
        raise InvalidInputError(f"{len(neighbors)} neighbouring frames but {len(poses)} poses")
    if rays is None:
        rays = ray_grid(intr)
    total = 0.0
    grad = np.zeros(depth.shape) if need_grad else None
    for frame, pose in zip(neighbors, poses):
        if pose is None:
            raise InvalidInputError("missing pose for a neighbouring frame")
        src = as_image(frame, "neighbour")
        _check_same(src.shape, ref.shape, "neighbour vs reference")
        loss, g = _mono_term(ref, src, depth, pose, intr, rays, need_grad)
        total += loss
        if need_grad:
            grad += g
    k = len(neighbors)
    return total / k, (grad / k if need_grad else None)


def loss_view_synthesis_mono(frames, depth, poses, intr: CameraIntrinsics, window: TemporalWindow | None = None) -> float:
    """Reprojection loss of the reference frame against its temporal neighbours.

    Parameters
    ----------
    frames : sequence of images
        Frames indexed by ``window``; by default frame 0 is the reference and
        the rest are neighbours.
    poses : mapping or sequence
        Reference-to-neighbour pose for each neighbour index.
    """
    frames = list(frames)
    if window is None:
        window = TemporalWindow(0, tuple(range(1, len(frames))))
    for idx in (window.reference,) + tuple(window.neighbors):
        if not 0 <= idx < len(frames):
            raise InvalidInputError(f"frame index {idx} out of range")
    if isinstance(poses, dict):
        lookup = poses
    else:
        poses = list(poses)
        if len(poses) == len(window.neighbors):
            lookup = dict(zip(window.neighbors, poses))
        else:
            lookup = dict(enumerate(poses))
    missing = [i for i in window.neighbors if lookup.get(i) is None]
    if missing:
        raise InvalidInputError(f"missing pose for neighbour frame(s) {missing}")
    return mono_loss_grad(
        frames[window.reference],
        [frames[i] for i in window.neighbors],
        depth,
        [lookup[i] for i in window.neighbors],
        intr,
        need_grad=False,
    )[0]
