"""Depth error and accuracy metrics with depth caps and evaluation crops."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from .camera import valid_depth
from .errors import EmptyEvaluationError, InvalidInputError

MIN_DEPTH = 1e-3
THRESHOLDS = (1.25, 1.25**2, 1.25**3)


@dataclass(frozen=True)
class EvaluationCrop:
    """Rectangular crop as fractions of image size: rows ``[top, bottom)``, columns ``[left, right)``."""

    top: float = 0.0
    bottom: float = 1.0
    left: float = 0.0
    right: float = 1.0

    @classmethod
    def garg(cls) -> "EvaluationCrop":
        return cls(0.40810811, 0.99189189, 0.03594771, 0.96405229)

    @classmethod
    def full(cls) -> "EvaluationCrop":
        return cls()

    def mask(self, shape) -> np.ndarray:
        h, w = shape
        r0, r1 = int(self.top * h), int(self.bottom * h)
        c0, c1 = int(self.left * w), int(self.right * w)
        if self.bottom >= 1.0:
            r1 = h
        if self.right >= 1.0:
            c1 = w
        out = np.zeros(shape, dtype=bool)
        out[r0:r1, c0:c1] = True
        return out


@dataclass(frozen=True)
class MetricReport:
    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    log10: float
    a1: float
    a2: float
    a3: float
    count: int
    cap: float

    FIELDS = ("abs_rel", "sq_rel", "rmse", "rmse_log", "log10", "a1", "a2", "a3", "count", "cap")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def mean(cls, reports) -> "MetricReport":
        """Unweighted mean over images (the benchmark convention); ``count`` is summed."""
        reports = list(reports)
        if not reports:
            raise EmptyEvaluationError("no reports to aggregate")
        vals = {}
        for f in fields(cls):
            col = [getattr(r, f.name) for r in reports]
            if f.name == "count":
                vals[f.name] = int(sum(col))
            elif f.name == "cap":
                vals[f.name] = col[0]
            else:
                vals[f.name] = float(np.mean(col))
        return cls(**vals)


def compute_errors(gt: np.ndarray, pred: np.ndarray, cap: float = float("nan")) -> MetricReport:
    """Metrics over matched 1-D arrays of valid ground truth and prediction."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.size == 0:
        raise EmptyEvaluationError("no valid pixels to evaluate")
    thresh = np.maximum(gt / pred, pred / gt)
    a1, a2, a3 = (float(np.mean(thresh < t)) for t in THRESHOLDS)
    diff = pred - gt
    log_diff = np.log(pred) - np.log(gt)
    return MetricReport(
        abs_rel=float(np.mean(np.abs(diff) / gt)),
        sq_rel=float(np.mean(diff**2 / gt)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rmse_log=float(np.sqrt(np.mean(log_diff**2))),
        log10=float(np.mean(np.abs(np.log10(pred) - np.log10(gt)))),
        a1=a1,
        a2=a2,
        a3=a3,
        count=int(gt.size),
        cap=float(cap),
    )


def evaluation_mask(gt, cap: float, crop: EvaluationCrop | None, filter_gt_by_cap: bool = True, min_depth: float = MIN_DEPTH):
    gt = np.asarray(gt, dtype=np.float64)
    m = valid_depth(gt) & (gt > min_depth)
    if filter_gt_by_cap:
        m &= gt <= cap
    if crop is not None:
        m &= crop.mask(gt.shape)
    return m


def evaluate(
    pred,
    gt,
    cap: float = 80.0,
    crop: EvaluationCrop | None = None,
    *,
    min_depth: float = MIN_DEPTH,
    clamp_pred: bool = True,
    filter_gt_by_cap: bool = True,
) -> MetricReport:
    """Evaluate a predicted depth map against sparse ground truth.

    Ground-truth pixels count when valid, above ``min_depth``, inside the crop
    and (by default) no deeper than ``cap``. Predictions are clamped to
    ``[min_depth, cap]``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} does not match ground truth {gt.shape}")
    if not cap > min_depth:
        raise InvalidInputError(f"cap must exceed {min_depth} m")
    m = evaluation_mask(gt, cap, crop, filter_gt_by_cap, min_depth)
    if not m.any():
        raise EmptyEvaluationError("no valid ground-truth pixels inside the evaluation region")
    p = pred[m]
    if clamp_pred:
        p = np.clip(np.nan_to_num(p, nan=min_depth, posinf=cap, neginf=min_depth), min_depth, cap)
    elif not np.all(valid_depth(p)):
        raise InvalidInputError("prediction has non-positive depth at evaluated pixels")
    return compute_errors(gt[m], p, cap)


def error_map(pred, gt, cap: float = 80.0) -> np.ndarray:
    """Per-pixel absolute relative error (NaN where ground truth is invalid)."""
    pred = np.clip(np.asarray(pred, dtype=np.float64), MIN_DEPTH, cap)
    gt = np.asarray(gt, dtype=np.float64)
    out = np.full(gt.shape, np.nan)
    m = valid_depth(gt)
    out[m] = np.abs(pred[m] - gt[m]) / gt[m]
    return out


def interpolate_sparse(gt) -> np.ndarray:
    """Densify sparse depth for visualisation: piecewise linear on a Delaunay
    triangulation, nearest-neighbour outside the convex hull. Valid input
    pixels are reproduced exactly."""
    gt = np.asarray(gt, dtype=np.float64)
    m = valid_depth(gt)
    rows, cols = np.nonzero(m)
    if len(rows) < 3:
        raise InvalidInputError("need at least 3 valid pixels to interpolate")
    pts = np.stack([cols, rows], axis=1).astype(np.float64)
    if np.linalg.matrix_rank(pts[1:] - pts[0]) < 2:
        raise InvalidInputError("valid pixels are collinear; cannot triangulate")
    vals = gt[m]
    out = gt.copy()
    hole_r, hole_c = np.nonzero(~m)
    if len(hole_r):
        q = np.stack([hole_c, hole_r], axis=1).astype(np.float64)
        lin = LinearNDInterpolator(pts, vals)(q)
        outside = np.isnan(lin)
        if outside.any():
            lin[outside] = NearestNDInterpolator(pts, vals)(q[outside])
        out[hole_r, hole_c] = lin
    return out
