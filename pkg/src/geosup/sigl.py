"""Gravity-informed plane losses on semantically selected image regions.

Horizontal surfaces (road, sidewalk) have their normal along gravity, so the
back-projected points of such a region should have constant height: the
horizontal-plane loss is the variance of ``X_i . g`` over the region.

Vertical surfaces (buildings, walls) have an unknown normal orthogonal to
gravity. The vertical-plane loss is the smallest variance of ``X_i . n`` over
unit ``n`` orthogonal to ``g``. It is available exactly (smaller eigenvalue of
a 2x2 matrix) and as a minimum over ``K`` evenly spaced directions, which is
what the gradients use.

All variances use 1/M normalisation. For points ``X_i = r_i Z_i`` on rays
``r_i`` the projection ``s_i = (r_i . n) Z_i`` is linear in depth, giving

    dL/dZ_i = 2/M (s_i - mean(s)) (r_i . n)

since the derivative of the mean term sums to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .camera import CameraIntrinsics, ray_grid, valid_depth
from .errors import InvalidInputError
from .semantics import DEFAULT_GATED, HORIZONTAL, VERTICAL, SemanticMask

DEFAULT_DIRECTIONS = 8
MIN_REGION_PIXELS = 16


class SinglePointWarning(UserWarning):
    """A plane loss was evaluated on a single point (always zero)."""


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1 and p.shape[0] == 3:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != 3:
        raise InvalidInputError(f"points must have shape (M, 3), got {p.shape}")
    if p.shape[0] == 0:
        raise InvalidInputError("point set is empty")
    return p


def _unit(gravity) -> np.ndarray:
    g = np.asarray(gravity, dtype=np.float64).reshape(3)
    n = np.linalg.norm(g)
    if not np.isfinite(n) or n == 0:
        raise InvalidInputError("gravity must be a non-zero finite 3-vector")
    return g / n


def null_space_basis(gravity) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``(b1, b2)`` spanning the plane orthogonal to gravity.

    ``b1`` is ``e_x`` with its gravity component removed (``e_y`` when ``e_x``
    is nearly parallel to gravity) and ``b2 = g x b1``.
    """
    g = _unit(gravity)
    for axis in np.eye(3)[:2]:
        v = axis - np.dot(axis, g) * g
        n = np.linalg.norm(v)
        if n >= 1e-6:
            break
    b1 = v / n
    b2 = np.cross(g, b1)
    b2 /= np.linalg.norm(b2)
    return b1, b2


def sampled_directions(gravity, count: int = DEFAULT_DIRECTIONS) -> np.ndarray:
    """``count`` unit directions ``cos(t) b1 + sin(t) b2`` at ``t = 2 pi k / count``."""
    if count < 1:
        raise InvalidInputError("direction count must be >= 1")
    b1, b2 = null_space_basis(gravity)
    theta = 2.0 * np.pi * np.arange(count) / count
    return np.cos(theta)[:, None] * b1 + np.sin(theta)[:, None] * b2


@dataclass(frozen=True)
class CenteredPoints:
    rows: np.ndarray
    mean: np.ndarray

    def __len__(self):
        return len(self.rows)


def center_points(points) -> CenteredPoints:
    """Subtract the sample mean from every point."""
    p = _as_points(points)
    mean = p.mean(axis=0)
    return CenteredPoints(p - mean, mean)


def projection_variance(points, direction) -> float:
    """Biased (1/M) sample variance of ``points @ direction``."""
    p = _as_points(points)
    s = p @ np.asarray(direction, dtype=np.float64)
    return float(np.mean((s - s.mean()) ** 2))


def _warn_single(p):
    if len(p) == 1:
        warnings.warn("plane loss of a single point is identically zero", SinglePointWarning, stacklevel=3)


def loss_hp(points, gravity) -> float:
    """Horizontal-plane loss: variance of the points' heights along gravity (m^2)."""
    p = _as_points(points)
    _warn_single(p)
    return projection_variance(p, _unit(gravity))


def scatter_matrix(points) -> np.ndarray:
    """1/M scatter matrix of the centred points."""
    c = center_points(points).rows
    return c.T @ c / len(c)


def loss_vp_exact(points, gravity) -> tuple[float, np.ndarray]:
    """Exact vertical-plane loss and its minimising unit normal.

    The normal is restricted to the null space of gravity, so with
    ``E = [b1 b2]`` the loss is the smaller eigenvalue of ``E^T S E``.
    """
    p = _as_points(points)
    _warn_single(p)
    b1, b2 = null_space_basis(gravity)
    E = np.stack([b1, b2], axis=1)
    B = E.T @ scatter_matrix(p) @ E
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    direction = E @ vecs[:, 0]
    return float(max(vals[0], 0.0)), direction / np.linalg.norm(direction)


def _argmin_first(values: np.ndarray) -> int:
    # values within a relative 1e-12 of the minimum count as ties; lowest index wins
    vmin = values.min()
    tol = 1e-12 * max(abs(vmin), 1e-300)
    return int(np.flatnonzero(values <= vmin + tol)[0])


def directional_variances(points, directions) -> np.ndarray:
    c = center_points(points).rows
    proj = c @ np.asarray(directions, dtype=np.float64).T
    return np.mean(proj**2, axis=0)


def loss_vp_sampled(points, gravity, count: int = DEFAULT_DIRECTIONS) -> tuple[float, int]:
    """Vertical-plane loss minimised over ``count`` sampled directions.

    Returns the loss and the index of the minimising direction; ties go to
    the lowest index. Never smaller than ``loss_vp_exact``.
    """
    if count < 1:
        raise InvalidInputError("direction count must be >= 1")
    p = _as_points(points)
    _warn_single(p)
    vals = directional_variances(p, sampled_directions(gravity, count))
    k = _argmin_first(vals)
    return float(vals[k]), k


def _check_rays(depths, rays):
    z = np.asarray(depths, dtype=np.float64).ravel()
    r = np.asarray(rays, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != 3:
        raise InvalidInputError(f"rays must have shape (M, 3), got {r.shape}")
    if len(z) != len(r):
        raise InvalidInputError(f"{len(z)} depths but {len(r)} rays")
    if len(z) == 0:
        raise InvalidInputError("no depths given")
    return z, r


def variance_grad(depths, rays, direction) -> tuple[float, np.ndarray]:
    """Variance of ``(r_i . n) Z_i`` and its gradient with respect to each ``Z_i``."""
    z, r = _check_rays(depths, rays)
    a = r @ np.asarray(direction, dtype=np.float64)
    s = a * z
    dev = s - s.mean()
    m = len(z)
    return float(np.mean(dev**2)), (2.0 / m) * dev * a


def loss_hp_grad(depths, rays, gravity) -> np.ndarray:
    """Gradient of the horizontal-plane loss with respect to per-point depth."""
    return variance_grad(depths, rays, _unit(gravity))[1]


def loss_vp_grad(depths, rays, gravity, count: int = DEFAULT_DIRECTIONS) -> np.ndarray:
    """Gradient of the sampled vertical-plane loss with the argmin direction held fixed."""
    z, r = _check_rays(depths, rays)
    dirs = sampled_directions(gravity, count)
    _, k = loss_vp_sampled(r * z[:, None], gravity, count)
    return variance_grad(z, r, dirs[k])[1]


# --- region aggregation ------------------------------------------------------


@dataclass(frozen=True)
class SiglConfig:
    """Weights and region rules for the plane losses.

    ``vp_mode`` selects ``"sampled"`` (default, used for gradients) or
    ``"exact"`` evaluation of the vertical-plane loss. ``per_component=False``
    pools each category into a single region.
    """

    w_hp: float = 0.5
    w_vp: float = 0.5
    categories: tuple[str, ...] = DEFAULT_GATED
    direction_count: int = DEFAULT_DIRECTIONS
    vp_mode: str = "sampled"
    min_region: int = MIN_REGION_PIXELS
    per_component: bool = True

    def __post_init__(self):
        if self.w_hp < 0 or self.w_vp < 0:
            raise InvalidInputError("loss weights must be non-negative")
        if self.vp_mode not in ("sampled", "exact"):
            raise InvalidInputError(f"vp_mode must be 'sampled' or 'exact', got {self.vp_mode!r}")
        if self.direction_count < 1:
            raise InvalidInputError("direction_count must be >= 1")


@dataclass(frozen=True)
class Region:
    index: int
    category: str
    orientation: str
    mask: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class RegionLoss:
    index: int
    category: str
    orientation: str
    pixels: int
    loss: float
    weight: float
    direction: tuple[float, float, float]

    @property
    def weighted(self) -> float:
        return self.weight * self.loss


@dataclass
class LossReport:
    """Total plane loss with its per-region and per-category breakdown."""

    total: float
    regions: list[RegionLoss]
    skipped_regions: int = 0
    extra: dict[str, float] = field(default_factory=dict)

    @property
    def per_category(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.regions:
            out[r.category] = out.get(r.category, 0.0) + r.weighted
        return out

    @property
    def hp(self) -> float:
        return sum(r.loss for r in self.regions if r.orientation == HORIZONTAL)

    @property
    def vp(self) -> float:
        return sum(r.loss for r in self.regions if r.orientation == VERTICAL)


def find_regions(mask: SemanticMask, categories, per_component: bool = True) -> list[Region]:
    """Plane regions of the gated categories, 4-connected components by default.

    Order is deterministic: categories in mask order, then component label order.
    """
    regions = []
    for cat in mask.category_names:
        if cat not in categories:
            continue
        orient = mask.orientation_of(cat)
        if orient not in (HORIZONTAL, VERTICAL):
            continue
        cmask = mask.category_mask(cat)
        if not cmask.any():
            continue
        if per_component:
            labels, n = ndimage.label(cmask)
            for lab in range(1, n + 1):
                regions.append(Region(len(regions), cat, orient, labels == lab))
        else:
            regions.append(Region(len(regions), cat, orient, cmask))
    return regions


def _region_term(z, r, gravity, orientation, cfg: SiglConfig, need_grad: bool):
    if orientation == HORIZONTAL:
        direction = _unit(gravity)
        loss, grad = variance_grad(z, r, direction)
        return loss, cfg.w_hp, direction, grad
    pts = r * z[:, None]
    if cfg.vp_mode == "exact":
        loss, direction = loss_vp_exact(pts, gravity)
        grad = variance_grad(z, r, direction)[1] if need_grad else None
        return loss, cfg.w_vp, direction, grad
    dirs = sampled_directions(gravity, cfg.direction_count)
    loss, k = loss_vp_sampled(pts, gravity, cfg.direction_count)
    grad = variance_grad(z, r, dirs[k])[1] if need_grad else None
    return loss, cfg.w_vp, dirs[k], grad


def _evaluate(depth, intr, gravity, mask, cfg, need_grad, rays=None):
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != mask.shape:
        raise InvalidInputError(f"depth shape {depth.shape} does not match mask {mask.shape}")
    if rays is None:
        rays = ray_grid(intr)
    good = valid_depth(depth)
    grad_map = np.zeros_like(depth) if need_grad else None
    results = []
    skipped = 0
    for region in find_regions(mask, cfg.categories, cfg.per_component):
        sel = region.mask & good
        count = int(np.count_nonzero(sel))
        weight = cfg.w_hp if region.orientation == HORIZONTAL else cfg.w_vp
        if count < cfg.min_region:
            skipped += 1
            continue
        z = depth[sel]
        r = rays[sel]
        loss, weight, direction, grad = _region_term(z, r, gravity, region.orientation, cfg, need_grad)
        if need_grad and weight != 0:
            grad_map[sel] += weight * grad
        results.append(
            RegionLoss(region.index, region.category, region.orientation, count, loss, weight, tuple(float(v) for v in direction))
        )
    total = 0.0
    for res in results:
        total += res.weighted
    return LossReport(total, results, skipped), grad_map


def sigl_total(depth, intr: CameraIntrinsics, gravity, mask: SemanticMask, config: SiglConfig | None = None) -> LossReport:
    """Weighted sum of plane losses over every gated region of a depth map."""
    return _evaluate(depth, intr, gravity, mask, config or SiglConfig(), need_grad=False)[0]


def sigl_total_grad(depth, intr: CameraIntrinsics, gravity, mask: SemanticMask, config: SiglConfig | None = None, rays=None):
    """``sigl_total`` plus its gradient with respect to the depth map.

    Pixels outside gated regions, in skipped regions, or with invalid depth get
    exactly zero gradient. Minimising directions are held fixed.
    """
    return _evaluate(depth, intr, gravity, mask, config or SiglConfig(), need_grad=True, rays=rays)
