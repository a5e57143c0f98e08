"""Analytic planar scenes with exact depth, semantics and textured views.

A plane is stored as ``N = n / d`` (unit normal over distance to the camera
centre), so its points satisfy ``X . N = 1``. Synthetic scenes use a level
camera with gravity ``(0, 1, 0)`` (image y points down), which makes ground
planes visible to a forward-looking camera.

Textures are sums of random sinusoids in plane coordinates: smooth, defined
everywhere and bit-reproducible from their seed, so any view of a plane can be
rendered consistently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraIntrinsics, ray_grid, valid_depth
from .errors import InvalidInputError, ParseError
from .gravity import rotation_from_rpy
from .semantics import LabelMapping, SemanticMask, default_mapping
from .warp import Pose

DEFAULT_GRAVITY = np.array([0.0, 1.0, 0.0])
IGNORE_LABEL = 255
TEXTURE_MODES = 12


@dataclass(frozen=True)
class Plane:
    """Plane ``{X : X . normal = distance}`` with a semantic label and texture.

    ``label`` is a class name (``road``) or category name (``flat``) of the
    label mapping. ``texture_scale`` is the typical texture wavelength in
    metres; ``texture_seed=None`` gives a constant grey plane.
    """

    normal: tuple[float, float, float]
    distance: float
    label: str
    texture_seed: int | None = 0
    texture_scale: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if n.shape != (3,) or not np.isfinite(norm) or norm == 0:
            raise InvalidInputError("plane normal must be a non-zero 3-vector")
        if not (np.isfinite(self.distance) and self.distance > 0):
            raise InvalidInputError("plane must not pass through the optical centre (distance > 0)")
        if not self.texture_scale > 0:
            raise InvalidInputError("texture_scale must be positive")
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))

    @property
    def N(self) -> np.ndarray:
        """Scaled normal with ``X . N = 1`` on the plane."""
        return np.asarray(self.normal) / self.distance

    def _texture_params(self):
        rng = np.random.default_rng(self.texture_seed)
        angles = rng.uniform(0, np.pi, TEXTURE_MODES)
        freqs = rng.uniform(0.5, 2.0, TEXTURE_MODES) / self.texture_scale
        phases = rng.uniform(0, 2 * np.pi, TEXTURE_MODES)
        amps = rng.uniform(0.2, 1.0, TEXTURE_MODES)
        return angles, freqs, phases, amps / amps.sum()

    def basis(self):
        n = np.asarray(self.normal)
        helper = np.eye(3)[np.argmin(np.abs(n))]
        u = np.cross(n, helper)
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)

    def texture(self, points) -> np.ndarray:
        """Intensity in [0.1, 0.9] at 3-D points on the plane."""
        pts = np.asarray(points, dtype=np.float64)
        if self.texture_seed is None:
            return np.full(pts.shape[:-1], 0.5)
        u_axis, v_axis = self.basis()
        u = pts @ u_axis
        v = pts @ v_axis
        angles, freqs, phases, amps = self._texture_params()
        out = np.zeros(pts.shape[:-1])
        for a, f, p, w in zip(angles, freqs, phases, amps):
            out += w * np.sin(2 * np.pi * f * (np.cos(a) * u + np.sin(a) * v) + p)
        return 0.5 + 0.4 * out


@dataclass(frozen=True)
class PlanarScene:
    planes: tuple[Plane, ...]
    intrinsics: CameraIntrinsics
    gravity: np.ndarray = field(default_factory=lambda: DEFAULT_GRAVITY.copy())
    baseline: float | None = None
    mapping: LabelMapping = field(default_factory=default_mapping, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "planes", tuple(self.planes))
        g = np.asarray(self.gravity, dtype=np.float64).reshape(3)
        object.__setattr__(self, "gravity", g / np.linalg.norm(g))

    def class_id(self, label: str) -> int:
        for cid, (name, _) in self.mapping.classes.items():
            if name == label:
                return cid
        return self.mapping.representative_class(label)


def _intersect(scene: PlanarScene, dirs: np.ndarray, origin=np.zeros(3)):
    """Nearest plane hit along ``origin + s * dirs``; returns ``(s, plane_index)``, index -1 on miss."""
    best = np.full(dirs.shape[:-1], np.inf)
    index = np.full(dirs.shape[:-1], -1, dtype=np.int32)
    for i, plane in enumerate(scene.planes):
        N = plane.N
        denom = dirs @ N
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (1.0 - origin @ N) / denom
        hit = np.isfinite(s) & (s > 0) & (s < best)
        best = np.where(hit, s, best)
        index = np.where(hit, i, index)
    best[index < 0] = np.nan
    return best, index


def render_depth(scene: PlanarScene, intr: CameraIntrinsics | None = None):
    """Per-pixel depth ``Z = 1 / (r . N)`` of the nearest plane, plus its semantic mask.

    Returns ``(depth, mask, plane_index)``; pixels hitting no plane have NaN
    depth, plane index -1 and the ignore label.
    """
    intr = intr or scene.intrinsics
    depth, index = _intersect(scene, ray_grid(intr))
    return depth, label_mask(scene, index), index


def class_id_map(scene: PlanarScene, index: np.ndarray) -> np.ndarray:
    ids = np.full(index.shape, IGNORE_LABEL, dtype=np.uint8)
    for i, plane in enumerate(scene.planes):
        ids[index == i] = scene.class_id(plane.label)
    return ids


def label_mask(scene: PlanarScene, index: np.ndarray) -> SemanticMask:
    return scene.mapping.resolve(class_id_map(scene, index))


def render_view(scene: PlanarScene, intr: CameraIntrinsics | None = None, pose: Pose | None = None) -> np.ndarray:
    """Render a single-channel (H, W) image from a camera at ``pose``.

    ``pose`` maps reference-camera points into the rendered camera
    (``X' = R X + t``); ``None`` is the reference camera. Misses render black.
    """
    intr = intr or scene.intrinsics
    rays = ray_grid(intr)
    if pose is None:
        origin = np.zeros(3)
        dirs = rays
    else:
        origin = -pose.rotation.T @ pose.translation
        dirs = rays @ pose.rotation
    s, index = _intersect(scene, dirs, origin)
    img = np.zeros(index.shape)
    for i, plane in enumerate(scene.planes):
        sel = index == i
        if sel.any():
            pts = origin + dirs[sel] * s[sel][:, None]
            img[sel] = plane.texture(pts)
    return img


def stereo_right_pose(baseline: float) -> Pose:
    """Pose of the second stereo camera, centred at ``-baseline`` on the x axis.

    With this placement ``I_R(x + fx B / Z, y) = I_L(x, y)``, matching the
    disparity sign used by the stereo loss.
    """
    return Pose(np.eye(3), np.array([baseline, 0.0, 0.0]))


def render_stereo_pair(scene: PlanarScene, intr: CameraIntrinsics | None = None, baseline: float | None = None):
    """Render ``(I_L, I_R, disparity)`` with true disparity ``fx * baseline / Z``."""
    intr = intr or scene.intrinsics
    baseline = baseline if baseline is not None else scene.baseline
    if baseline is None or not baseline > 0:
        raise InvalidInputError("stereo rendering needs a positive baseline")
    depth, _, _ = render_depth(scene, intr)
    left = render_view(scene, intr)
    right = render_view(scene, intr, stereo_right_pose(baseline))
    with np.errstate(invalid="ignore"):
        disparity = intr.fx * baseline / depth
    return left, right, disparity


def add_depth_noise(depth, sigma: float = 0.0, dropout: float = 0.0, seed: int | None = 0) -> np.ndarray:
    """Multiplicative Gaussian noise ``Z (1 + sigma n)`` and random dropout to NaN.

    Reproducible for a given seed. Noisy depths are floored at a tiny
    positive value so valid pixels stay valid.
    """
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    if not 0 <= dropout <= 1:
        raise InvalidInputError("dropout must be in [0, 1]")
    depth = np.asarray(depth, dtype=np.float64)
    out = depth.copy()
    rng = np.random.default_rng(seed)
    good = valid_depth(depth)
    if sigma > 0:
        noise = rng.standard_normal(depth.shape)
        out[good] = np.maximum(depth[good] * (1.0 + sigma * noise[good]), 1e-6 * depth[good])
    if dropout > 0:
        out[rng.random(depth.shape) < dropout] = np.nan
    return out


def two_plane_scene(
    intr: CameraIntrinsics,
    camera_height: float = 1.5,
    wall_distance: float = 12.0,
    texture_scale: float = 1.0,
    baseline: float | None = 0.54,
    seed: int = 0,
) -> PlanarScene:
    """Ground plane below a level camera plus a fronto-parallel wall ahead."""
    return PlanarScene(
        (
            Plane((0.0, 1.0, 0.0), camera_height, "road", seed, texture_scale),
            Plane((0.0, 0.0, 1.0), wall_distance, "building", seed + 1, texture_scale),
        ),
        intr,
        DEFAULT_GRAVITY.copy(),
        baseline,
    )


def random_scene(rng: np.random.Generator, intr: CameraIntrinsics, max_walls: int = 3) -> PlanarScene:
    """Ground plane, a far backdrop and random vertical walls under a random gravity.

    The whole layout is rotated by a random small tilt so gravity is not
    axis-aligned in the camera frame.
    """
    tilt = rng.normal(scale=0.08, size=3)
    R = rotation_from_rpy(*tilt)
    g = R @ DEFAULT_GRAVITY
    planes = [Plane(tuple(g), rng.uniform(1.0, 2.5), "road", int(rng.integers(1 << 30)))]
    back_n = R @ np.array([0.0, 0.0, 1.0])
    planes.append(Plane(tuple(back_n), rng.uniform(30.0, 60.0), "building", int(rng.integers(1 << 30))))
    for _ in range(int(rng.integers(1, max_walls + 1))):
        yaw = rng.uniform(-1.2, 1.2)
        n_local = np.array([np.sin(yaw), 0.0, np.cos(yaw)])
        label = ["building", "wall", "car"][int(rng.integers(3))]
        planes.append(Plane(tuple(R @ n_local), rng.uniform(4.0, 25.0), label, int(rng.integers(1 << 30))))
    return PlanarScene(tuple(planes), intr, g)


# --- scene files ---------------------------------------------------------------


def parse_scene(text: str, source: str = "<string>") -> PlanarScene:
    """Parse a plain-text scene description.

    Lines (``#`` comments allowed)::

        camera fx fy cx cy width height
        gravity gx gy gz              # optional, default 0 1 0
        baseline metres               # optional, enables stereo rendering
        plane nx ny nz distance label texture_seed [texture_scale]

    ``texture_seed`` may be ``none`` for an untextured plane.
    """
    intr = None
    gravity = DEFAULT_GRAVITY.copy()
    baseline = None
    planes = []
    mapping = default_mapping()
    names = {name for name, _ in mapping.classes.values()} | set(mapping.categories)

    def nums(parts, count, lineno, what):
        if len(parts) != count:
            raise ParseError(f"{source}:{lineno}: '{what}' needs {count} values, got {len(parts)}")
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"{source}:{lineno}: non-numeric value in '{what}' line") from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *parts = line.split()
        try:
            if key == "camera":
                fx, fy, cx, cy, w, h = nums(parts, 6, lineno, key)
                intr = CameraIntrinsics(fx, fy, cx, cy, int(w), int(h))
            elif key == "gravity":
                gravity = np.array(nums(parts, 3, lineno, key))
                if not np.linalg.norm(gravity) > 0:
                    raise ParseError(f"{source}:{lineno}: gravity has zero norm")
            elif key == "baseline":
                (baseline,) = nums(parts, 1, lineno, key)
            elif key == "plane":
                if len(parts) not in (6, 7):
                    raise ParseError(f"{source}:{lineno}: 'plane' needs 'nx ny nz distance label seed [scale]'")
                nx, ny, nz, dist = nums(parts[:4], 4, lineno, key)
                label = parts[4]
                if label not in names:
                    raise ParseError(f"{source}:{lineno}: unknown label '{label}'")
                seed = None if parts[5].lower() == "none" else int(parts[5])
                scale = float(parts[6]) if len(parts) == 7 else 1.0
                planes.append(Plane((nx, ny, nz), dist, label, seed, scale))
            else:
                raise ParseError(f"{source}:{lineno}: unknown directive '{key}'")
        except ParseError:
            raise
        except (ValueError, InvalidInputError) as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from None
    if intr is None:
        raise ParseError(f"{source}: missing 'camera' line")
    if not planes:
        raise ParseError(f"{source}: scene has no planes")
    return PlanarScene(tuple(planes), intr, gravity, baseline, mapping)


def format_scene(scene: PlanarScene) -> str:
    k = scene.intrinsics
    lines = [
        f"camera {k.fx!r} {k.fy!r} {k.cx!r} {k.cy!r} {k.width} {k.height}",
        "gravity " + " ".join(repr(float(v)) for v in scene.gravity),
    ]
    if scene.baseline is not None:
        lines.append(f"baseline {scene.baseline!r}")
    for p in scene.planes:
        seed = "none" if p.texture_seed is None else str(p.texture_seed)
        lines.append("plane " + " ".join(repr(v) for v in p.normal) + f" {p.distance!r} {p.label} {seed} {p.texture_scale!r}")
    return "\n".join(lines) + "\n"


def with_intrinsics(scene: PlanarScene, intr: CameraIntrinsics) -> PlanarScene:
    return replace(scene, intrinsics=intr)
