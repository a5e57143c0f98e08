"""First-order refinement of a per-pixel inverse-depth map.

The objective is a weighted sum of a photometric data term (stereo view
synthesis or monocular reprojection), edge-aware smoothness on inverse depth,
and the gravity-informed plane losses on gated regions. Steps come from Adam;
a step that would raise the objective is halved and retried, and dropped if
it still fails, so accepted iterates never increase the loss.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .camera import CameraIntrinsics, ray_grid
from .errors import ConfigurationError, InvalidInputError, NumericalError
from .kvfile import format_key_values, parse_key_values, read_key_values
from .regularizers import edge_weights, smoothness_grad
from .semantics import DEFAULT_GATED, SemanticMask
from .sigl import SiglConfig, sigl_total, sigl_total_grad
from .warp import Pose, as_image, mono_loss_grad, stereo_loss_grad

logger = logging.getLogger(__name__)

TERMS = ("photometric", "smoothness", "hp", "vp")


@dataclass(frozen=True)
class RefinementConfig:
    """Weights, optimizer settings and bounds for ``refine``.

    Inverse depth is kept in ``[d_min, d_max]`` (1/m). Weights are calibration
    defaults, not values taken from any training setup.
    """

    photometric: float = 1.0
    smoothness: float = 0.1
    w_hp: float = 0.5
    w_vp: float = 0.5
    step_size: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iterations: int = 300
    tolerance: float = 1e-7
    patience: int = 10
    d_min: float = 1e-3
    d_max: float = 10.0
    categories: tuple[str, ...] = DEFAULT_GATED
    direction_count: int = 8
    vp_mode: str = "sampled"
    min_region: int = 16
    per_component: bool = True
    edge_weight: float = 1.0
    max_backtracks: int = 5

    def __post_init__(self):
        for name in ("photometric", "smoothness", "w_hp", "w_vp"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"weight '{name}' must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in (0, 1)")
        if not self.eps > 0 or not self.step_size > 0:
            raise ConfigurationError("eps and step_size must be positive")
        if not 0 < self.d_min < self.d_max:
            raise ConfigurationError("need 0 < d_min < d_max")
        if self.max_iterations < 0 or self.max_backtracks < 0 or self.patience < 1:
            raise ConfigurationError("iteration counts must be non-negative (patience >= 1)")
        if self.vp_mode not in ("sampled", "exact"):
            raise ConfigurationError(f"vp_mode must be 'sampled' or 'exact', got {self.vp_mode!r}")
        if self.direction_count < 1:
            raise ConfigurationError("direction_count must be at least 1")
        object.__setattr__(self, "categories", tuple(self.categories))

    @property
    def uses_sigl(self) -> bool:
        return self.w_hp > 0 or self.w_vp > 0

    def sigl_config(self) -> SiglConfig:
        return SiglConfig(
            self.w_hp, self.w_vp, self.categories, self.direction_count, self.vp_mode, self.min_region, self.per_component
        )

    def with_overrides(self, **kw) -> "RefinementConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        return format_key_values([(f.name, _format_value(getattr(self, f.name))) for f in fields(self)])

    @classmethod
    def from_mapping(cls, kv: dict[str, str], source: str = "<config>") -> "RefinementConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in kv.items():
            if key not in known:
                raise ConfigurationError(f"{source}: unknown key '{key}'")
            default = getattr(cls, key, None)
            try:
                if key == "categories":
                    kwargs[key] = tuple(c.strip() for c in raw.split(",") if c.strip())
                elif isinstance(default, bool):
                    if raw.lower() not in ("true", "false"):
                        raise ValueError(raw)
                    kwargs[key] = raw.lower() == "true"
                elif isinstance(default, int):
                    kwargs[key] = int(raw)
                elif isinstance(default, float):
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw
            except ValueError:
                raise ConfigurationError(f"{source}: bad value for '{key}': {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RefinementConfig":
        return cls.from_mapping(parse_key_values(text, source), source)

    @classmethod
    def from_file(cls, path) -> "RefinementConfig":
        return cls.from_mapping(read_key_values(path), str(path))


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(grad, state: AdamState, cfg: RefinementConfig, term: str = "total"):
    """One bias-corrected Adam update; returns ``(update, new_state)``.

    The update is to be added to the variable. Raises ``NumericalError``
    naming ``term`` if the gradient has non-finite entries.
    """
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.m.shape:
        raise InvalidInputError(f"gradient shape {g.shape} does not match optimizer state {state.m.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError(term)
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    update = -cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return update, AdamState(m, v, t)


@dataclass(frozen=True)
class StereoInputs:
    """Rectified pair; the right view is sampled at ``x + fx * baseline * inv_depth``."""

    left: np.ndarray
    right: np.ndarray
    baseline: float


@dataclass(frozen=True)
class MonoInputs:
    """Reference frame, neighbouring frames and reference-to-neighbour poses."""

    reference: np.ndarray
    neighbors: tuple
    poses: tuple[Pose, ...]


@dataclass
class TraceRecord:
    iteration: int
    total: float
    terms: dict[str, float]
    step_scale: float


@dataclass
class RefinementTrace:
    initial: TraceRecord
    records: list[TraceRecord] = field(default_factory=list)
    reason: str = ""
    final: np.ndarray | None = None

    def __len__(self):
        return len(self.records)

    @property
    def totals(self) -> list[float]:
        return [self.initial.total] + [r.total for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("iteration", "total") + TERMS + ("step_scale",))
        for r in [self.initial] + self.records:
            w.writerow([r.iteration, repr(r.total)] + [repr(r.terms[t]) for t in TERMS] + [repr(r.step_scale)])
        return buf.getvalue()


class Objective:
    """Weighted refinement objective over inverse depth with per-term gradients."""

    def __init__(self, inputs, gravity, mask: SemanticMask | None, intr: CameraIntrinsics, cfg: RefinementConfig):
        self.cfg = cfg
        self.intr = intr
        self.inputs = inputs
        self.gravity = gravity
        self.mask = mask
        self.rays = ray_grid(intr)
        self.sigl_cfg = cfg.sigl_config()
        if isinstance(inputs, StereoInputs):
            self.guide = as_image(inputs.left)
            if not inputs.baseline > 0:
                raise InvalidInputError("stereo baseline must be positive")
        elif isinstance(inputs, MonoInputs):
            self.guide = as_image(inputs.reference)
            if len(inputs.poses) != len(inputs.neighbors) or any(p is None for p in inputs.poses):
                raise InvalidInputError("every neighbouring frame needs a pose")
        elif inputs is None:
            if cfg.photometric > 0:
                raise ConfigurationError("photometric weight is non-zero but no images were given")
            self.guide = None
        else:
            raise InvalidInputError(f"unsupported inputs {type(inputs).__name__}")
        if self.guide is not None and self.guide.shape[:2] != intr.shape:
            raise InvalidInputError("image size does not match intrinsics")
        if cfg.smoothness > 0:
            guide = self.guide if self.guide is not None else np.zeros(intr.shape)
            self.edge = edge_weights(guide, cfg.edge_weight)
        if cfg.uses_sigl:
            if gravity is None:
                raise ConfigurationError("plane losses requested (w_hp/w_vp > 0) but no gravity given")
            if mask is None:
                raise ConfigurationError("plane losses requested but no semantic mask given")
            if mask.shape != intr.shape:
                raise InvalidInputError("semantic mask size does not match intrinsics")

    @property
    def active(self) -> bool:
        c = self.cfg
        return c.photometric > 0 or c.smoothness > 0 or c.uses_sigl

    def __call__(self, inv_depth: np.ndarray):
        cfg = self.cfg
        terms = dict.fromkeys(TERMS, 0.0)
        grad = np.zeros_like(inv_depth)

        def add(name, g):
            if not np.all(np.isfinite(g)):
                raise NumericalError(name)
            grad[...] += g

        if cfg.photometric > 0:
            if isinstance(self.inputs, StereoInputs):
                scale = self.intr.fx * self.inputs.baseline
                loss, g, _ = stereo_loss_grad(self.inputs.left, self.inputs.right, scale * inv_depth)
                g = g * scale
            else:
                depth = 1.0 / inv_depth
                loss, gz = mono_loss_grad(
                    self.inputs.reference, self.inputs.neighbors, depth, self.inputs.poses, self.intr, self.rays
                )
                g = -gz / inv_depth**2
            terms["photometric"] = loss
            add("photometric", cfg.photometric * g)
        if cfg.smoothness > 0:
            loss, g = smoothness_grad(inv_depth, None, weights=self.edge)
            terms["smoothness"] = loss
            add("smoothness", cfg.smoothness * g)
        if cfg.uses_sigl:
            depth = 1.0 / inv_depth
            report, gz = sigl_total_grad(depth, self.intr, self.gravity, self.mask, self.sigl_cfg, rays=self.rays)
            terms["hp"] = report.hp
            terms["vp"] = report.vp
            add("sigl", -gz / inv_depth**2)
        total = (
            cfg.photometric * terms["photometric"]
            + cfg.smoothness * terms["smoothness"]
            + cfg.w_hp * terms["hp"]
            + cfg.w_vp * terms["vp"]
        )
        if not np.isfinite(total):
            raise NumericalError("total")
        return total, terms, grad


def refine(init, inputs, gravity, mask: SemanticMask | None, intr: CameraIntrinsics, cfg: RefinementConfig | None = None):
    """Refine an inverse-depth map; returns ``(refined, trace)``.

    Parameters
    ----------
    init : ndarray (H, W)
        Initial inverse depth (1/m), finite and within ``[d_min, d_max]``.
    inputs : StereoInputs, MonoInputs or None
        Images for the photometric term (``None`` only if its weight is 0).
    gravity : 3-vector or None
        Camera-frame gravity; required when a plane-loss weight is non-zero.
    mask : SemanticMask or None
        Required when a plane-loss weight is non-zero.
    """
    cfg = cfg or RefinementConfig()
    rho = np.array(init, dtype=np.float64)
    if rho.shape != intr.shape:
        raise InvalidInputError(f"initial map shape {rho.shape} does not match intrinsics {intr.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidInputError("initial inverse depth has non-finite entries")
    if rho.min() < cfg.d_min or rho.max() > cfg.d_max:
        raise InvalidInputError(f"initial inverse depth outside bounds [{cfg.d_min}, {cfg.d_max}]")
    objective = Objective(inputs, gravity, mask, intr, cfg)
    if not objective.active:
        trace = RefinementTrace(TraceRecord(0, 0.0, dict.fromkeys(TERMS, 0.0), 0.0), reason="no_active_terms", final=rho)
        return rho, trace
    f, terms, g = objective(rho)
    trace = RefinementTrace(TraceRecord(0, f, terms, 0.0))
    state = AdamState.zeros(rho.shape)
    small = 0
    rejected = 0
    reason = "max_iterations"
    for it in range(1, cfg.max_iterations + 1):
        update, state = adam_step(g, state, cfg)
        scale = 1.0
        accepted = None
        for _ in range(cfg.max_backtracks + 1):
            cand = np.clip(rho + scale * update, cfg.d_min, cfg.d_max)
            fc, tc, gc = objective(cand)
            if fc <= f:
                accepted = (cand, fc, tc, gc)
                break
            scale *= 0.5
        if accepted is None:
            # restart the moments from the current point rather than repeat a failed direction
            state = AdamState.zeros(rho.shape)
            rejected += 1
            logger.debug("iteration %d: step rejected after %d halvings", it, cfg.max_backtracks)
            if rejected >= cfg.patience:
                reason = "stalled"
                break
            continue
        rejected = 0
        cand, fc, tc, gc = accepted
        rel = (f - fc) / max(abs(f), 1e-300)
        rho, f, g = cand, fc, gc
        trace.records.append(TraceRecord(it, fc, tc, scale))
        small = small + 1 if rel < cfg.tolerance else 0
        if small >= cfg.patience:
            reason = "converged"
            break
    trace.reason = reason
    trace.final = rho
    return rho, trace


def plane_projection_variance(depth, intr: CameraIntrinsics, gravity, mask: SemanticMask, categories=DEFAULT_GATED) -> float:
    """Sum over gated regions of the exact plane variance (HP along gravity, VP exact).

    Used to measure how planar a depth map is on regions that should be planar.
    """
    cfg = SiglConfig(1.0, 1.0, tuple(categories), vp_mode="exact")
    return sigl_total(depth, intr, gravity, mask, cfg).total
