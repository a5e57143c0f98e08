"""Readers and writers for depth maps, images, labels, calibration and IMU records.

Depth PNGs follow the KITTI convention: 16-bit single channel, metres =
raw / 256, raw 0 = invalid. Float maps that must survive exactly go to PFM.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .camera import CameraIntrinsics, valid_depth
from .errors import FormatError, ParseError, ValidationError
from .gravity import rotation_from_rpy, validate_rotation
from .kvfile import format_key_values, parse_floats, read_key_values
from .semantics import LabelMapping, SemanticMask

DEPTH_SCALE = 256.0
CALIB_KEYS = ("fx", "fy", "cx", "cy", "width", "height")
ROTATION_TOL = 1e-6


# --- depth -----------------------------------------------------------------------


def read_depth_png(path) -> np.ndarray:
    """KITTI-style depth PNG to float metres, NaN where raw is 0."""
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise FormatError(f"{path}: depth PNG must be 16-bit single channel, got mode {im.mode}")
        raw = np.array(im)
    if raw.ndim != 2:
        raise FormatError(f"{path}: depth PNG must be single channel")
    if raw.dtype != np.uint16:
        if raw.min() < 0 or raw.max() > 65535:
            raise FormatError(f"{path}: depth PNG values outside 16-bit range")
        raw = raw.astype(np.uint16)
    depth = raw.astype(np.float64) / DEPTH_SCALE
    depth[raw == 0] = np.nan
    return depth


def depth_to_raw(depth) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    raw = np.zeros(depth.shape, dtype=np.uint16)
    m = valid_depth(depth)
    scaled = np.round(depth[m] * DEPTH_SCALE)
    if np.any(scaled > 65535):
        raise ValidationError(f"depth exceeds {65535 / DEPTH_SCALE:.2f} m, not representable in a depth PNG")
    raw[m] = np.maximum(scaled, 1).astype(np.uint16)
    return raw


def write_depth_png(path, depth) -> None:
    """Write metres as raw = round(256 depth); invalid pixels become 0."""
    Image.fromarray(depth_to_raw(depth)).save(path)


def write_pfm(path, array) -> None:
    """Single-channel float32 PFM."""
    a = np.asarray(array, dtype=np.float32)
    if a.ndim != 2:
        raise FormatError("PFM writer expects a 2-D array")
    if not cv2.imwrite(str(path), a):
        raise FormatError(f"{path}: could not write PFM")


def read_pfm(path) -> np.ndarray:
    a = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if a is None or a.dtype != np.float32:
        raise FormatError(f"{path}: not a readable float PFM")
    return a.astype(np.float64)


# --- images and labels -------------------------------------------------------------


def read_image(path) -> np.ndarray:
    """8-bit grey or RGB PNG to floats in [0, 1], shape (H, W) or (H, W, 3)."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode in ("RGB", "RGBA"):
            return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            return np.asarray(im, dtype=np.float64) / 65535.0
    raise FormatError(f"{path}: unsupported image mode {im.mode}")


def write_image(path, img, bits: int = 8) -> None:
    """Write an image in [0, 1]; ``bits=16`` is supported for single-channel images."""
    a = np.clip(np.nan_to_num(np.asarray(img, dtype=np.float64)), 0.0, 1.0)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if bits == 16:
        if a.ndim != 2:
            raise FormatError("16-bit images must be single channel")
        Image.fromarray(np.round(a * 65535).astype(np.uint16)).save(path)
    else:
        Image.fromarray(np.round(a * 255).astype(np.uint8)).save(path)


def read_label_png(path, mapping: LabelMapping) -> SemanticMask:
    """8-bit single-channel class-ID PNG resolved through ``mapping``."""
    with Image.open(path) as im:
        if im.mode not in ("L", "P"):
            raise FormatError(f"{path}: label PNG must be 8-bit single channel, got mode {im.mode}")
        ids = np.array(im)
    return mapping.resolve(ids)


def write_label_png(path, class_ids) -> None:
    ids = np.asarray(class_ids)
    if ids.min() < 0 or ids.max() > 255:
        raise ValidationError("class IDs must fit in 8 bits")
    Image.fromarray(ids.astype(np.uint8), mode="L").save(path)


def read_mapping(path) -> LabelMapping:
    with open(path, encoding="utf-8") as fh:
        return LabelMapping.from_text(fh.read(), str(path))


def visualize(values, vmax: float | None = None) -> np.ndarray:
    """Scale a non-negative map to [0, 1] for a grey PNG: dark is small, NaN is black."""
    v = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(v)
    if vmax is None:
        vmax = float(np.max(v[finite])) if finite.any() else 1.0
    vmax = vmax if vmax > 0 else 1.0
    return np.where(finite, np.clip(v / vmax, 0.0, 1.0), 0.0)


# --- calibration ---------------------------------------------------------------------


@dataclass(frozen=True)
class Calibration:
    intrinsics: CameraIntrinsics
    R_cb: np.ndarray | None = None


def parse_calibration(kv: dict[str, str], source: str = "<calibration>") -> Calibration:
    for key in CALIB_KEYS:
        if key not in kv:
            raise ParseError(f"{source}: missing key '{key}'")
    vals = {k: parse_floats(kv[k], k, 1, source)[0] for k in CALIB_KEYS}
    for k in ("width", "height"):
        if vals[k] != int(vals[k]):
            raise ValidationError(f"{source}: '{k}' must be an integer")
    intr = CameraIntrinsics(vals["fx"], vals["fy"], vals["cx"], vals["cy"], int(vals["width"]), int(vals["height"]))
    R_cb = None
    if "R_cb" in kv:
        R = np.array(parse_floats(kv["R_cb"], "R_cb", 9, source)).reshape(3, 3)
        try:
            R_cb = validate_rotation(R, ROTATION_TOL)
        except ValidationError as exc:
            raise ValidationError(f"{source}: R_cb invalid: {exc}") from None
    elif "R_cb_rpy" in kv:
        R_cb = rotation_from_rpy(*parse_floats(kv["R_cb_rpy"], "R_cb_rpy", 3, source))
    extra = set(kv) - set(CALIB_KEYS) - {"R_cb", "R_cb_rpy"}
    if extra:
        raise ParseError(f"{source}: unknown key(s) {sorted(extra)}")
    return Calibration(intr, R_cb)


def read_calibration(path) -> Calibration:
    """Key-value calibration: fx, fy, cx, cy, width, height, optional R_cb (9 values, row-major)."""
    return parse_calibration(read_key_values(path), str(path))


def write_calibration(path, intr: CameraIntrinsics, R_cb=None) -> None:
    items = [
        ("fx", repr(float(intr.fx))),
        ("fy", repr(float(intr.fy))),
        ("cx", repr(float(intr.cx))),
        ("cy", repr(float(intr.cy))),
        ("width", str(int(intr.width))),
        ("height", str(int(intr.height))),
    ]
    if R_cb is not None:
        items.append(("R_cb", " ".join(repr(float(v)) for v in np.asarray(R_cb).ravel())))
    Path(path).write_text(format_key_values(items), encoding="utf-8")


def read_gravity(path) -> np.ndarray:
    """Camera-frame gravity from a key-value file with ``gravity = gx gy gz``."""
    kv = read_key_values(path)
    if "gravity" not in kv:
        raise ParseError(f"{path}: missing key 'gravity'")
    g = np.array(parse_floats(kv["gravity"], "gravity", 3, str(path)))
    n = np.linalg.norm(g)
    if not n > 0:
        raise ValidationError(f"{path}: gravity has zero norm")
    return g / n


def write_gravity(path, gravity) -> None:
    Path(path).write_text(format_key_values([("gravity", " ".join(repr(float(v)) for v in gravity))]), encoding="utf-8")


# --- IMU records --------------------------------------------------------------------------

ACCEL_COLUMNS = ("timestamp", "abx", "aby", "abz", "asx", "asy", "asz")
ORIENTATION_COLUMNS = ("timestamp", "roll", "pitch", "yaw")


@dataclass(frozen=True)
class AccelPair:
    timestamp: float
    body: np.ndarray
    spatial: np.ndarray


@dataclass(frozen=True)
class OrientationRecord:
    timestamp: float
    roll: float
    pitch: float
    yaw: float

    @property
    def R_bs(self) -> np.ndarray:
        return rotation_from_rpy(self.roll, self.pitch, self.yaw)


def read_imu_record(path):
    """IMU CSV: acceleration pairs or roll/pitch/yaw rows, detected from the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty IMU file") from None
        if "roll" in header or "pitch" in header or "yaw" in header:
            columns, kind = ORIENTATION_COLUMNS, "orientation"
        else:
            columns, kind = ACCEL_COLUMNS, "accel"
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in columns]
        records = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(row[i]) for i in idx]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field") from None
            if not all(np.isfinite(vals)):
                raise ParseError(f"{path}:{lineno}: non-finite field")
            if kind == "accel":
                records.append(AccelPair(vals[0], np.array(vals[1:4]), np.array(vals[4:7])))
            else:
                records.append(OrientationRecord(*vals))
    return records


def write_imu_record(path, records) -> None:
    records = list(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if records and isinstance(records[0], OrientationRecord):
            w.writerow(ORIENTATION_COLUMNS)
            for r in records:
                w.writerow([repr(r.timestamp), repr(r.roll), repr(r.pitch), repr(r.yaw)])
        else:
            w.writerow(ACCEL_COLUMNS)
            for r in records:
                w.writerow([repr(r.timestamp)] + [repr(float(v)) for v in (*r.body, *r.spatial)])


def accel_pairs(records) -> np.ndarray:
    """Stack ``AccelPair`` records into the ``(n, 2, 3)`` array ``estimate_R_bs`` takes."""
    return np.array([[r.body, r.spatial] for r in records], dtype=np.float64).reshape(-1, 2, 3)


def list_files(directory, suffixes=(".png",)) -> dict[str, Path]:
    """Files in ``directory`` keyed by name, for matching prediction and ground-truth sets."""
    d = Path(directory)
    if not d.is_dir():
        raise FormatError(f"{directory}: not a directory")
    return {p.name: p for p in sorted(d.iterdir()) if p.is_file() and p.suffix.lower() in suffixes}


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
