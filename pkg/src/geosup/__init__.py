"""Gravity-informed plane losses, photometric losses and depth metrics.

The plane losses penalise depth maps whose back-projected points on road-like
regions are not level and on building-like regions are not on a vertical
plane; ``refiner.refine`` uses them to refine an inverse-depth map.
"""

from ._kernels import BACKEND
from .camera import CameraIntrinsics, back_project, back_project_map, project
from .gravity import estimate_R_bs, gravity_from_body, gravity_from_spatial
from .metrics import EvaluationCrop, MetricReport, evaluate
from .refiner import RefinementConfig, refine
from .semantics import LabelMapping, SemanticMask, default_mapping
from .sigl import loss_hp, loss_vp_exact, loss_vp_sampled, sigl_total

__all__ = [
    "BACKEND",
    "CameraIntrinsics",
    "EvaluationCrop",
    "LabelMapping",
    "MetricReport",
    "RefinementConfig",
    "SemanticMask",
    "back_project",
    "back_project_map",
    "default_mapping",
    "estimate_R_bs",
    "evaluate",
    "gravity_from_body",
    "gravity_from_spatial",
    "loss_hp",
    "loss_vp_exact",
    "loss_vp_sampled",
    "project",
    "refine",
    "sigl_total",
]
__version__ = "0.1.0"
