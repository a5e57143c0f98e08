"""Rotations and transfer of gravity into the camera frame.

Camera-frame gravity is ``normalize(R_cb @ R_bs @ g_s)`` with the spatial-frame
gravity ``g_s = [0, 0, 9.8]``. ``R_bs`` is estimated from accelerations measured
simultaneously in the body and spatial frames.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateConfigurationError, InvalidInputError, ValidationError

GRAVITY_SPATIAL = np.array([0.0, 0.0, 9.8])

ORTHO_TOL = 1e-9


def validate_rotation(R, tol: float = ORTHO_TOL) -> np.ndarray:
    """Return ``R`` as a float array, raising ``ValidationError`` if it is not in SO(3)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValidationError("rotation has non-finite entries")
    err = np.max(np.abs(R.T @ R - np.eye(3)))
    if err > tol:
        raise ValidationError(f"rotation is not orthogonal (max |R^T R - I| = {err:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise ValidationError(f"rotation determinant is {det:.12g}, expected +1")
    return R


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """ZYX Euler angles in radians: ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues formula for a rotation of ``angle`` radians about ``axis``."""
    a = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(a)
    if n == 0:
        raise InvalidInputError("rotation axis has zero length")
    a = a / n
    Kx = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * Kx + (1.0 - np.cos(angle)) * (Kx @ Kx)


def rotation_angle(R) -> float:
    """Geodesic angle of ``R`` in radians."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise InvalidInputError("gravity vector has zero or non-finite norm")
    return v / n


def gravity_from_body(gravity_body, R_cb) -> np.ndarray:
    """Unit camera-frame gravity from a body-frame gravity vector."""
    g = np.asarray(gravity_body, dtype=np.float64)
    if g.shape != (3,):
        raise InvalidInputError("gravity must be a 3-vector")
    _normalize(g)
    return _normalize(validate_rotation(R_cb) @ g)


def gravity_from_spatial(R_cb, R_bs, gravity_spatial=GRAVITY_SPATIAL) -> np.ndarray:
    """Unit camera-frame gravity ``normalize(R_cb @ R_bs @ g_s)``."""
    R_cb = validate_rotation(R_cb)
    R_bs = validate_rotation(R_bs)
    return _normalize(R_cb @ (R_bs @ np.asarray(gravity_spatial, dtype=np.float64)))


def align_vectors(source, target) -> np.ndarray:
    """Minimal rotation taking the direction of ``source`` onto that of ``target``.

    The result is ambiguous up to a rotation about ``target``; gravity, which
    is the only thing it is used for, is unaffected by that ambiguity.
    """
    a = _normalize(source)
    b = _normalize(target)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.dot(a, b))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: half turn about any axis orthogonal to a
        helper = np.eye(3)[np.argmin(np.abs(a))]
        return rotation_about_axis(np.cross(a, helper), np.pi)
    return rotation_about_axis(axis, np.arctan2(s, c))


def estimate_R_bs(pairs, single_pair: bool = False, window: int | None = None) -> np.ndarray:
    """Spatial-to-body rotation from paired accelerations.

    Solves ``min_R sum ||a_b - R a_s||^2`` over SO(3) via the SVD of the
    attitude profile matrix ``B = sum a_b a_s^T``.

    Parameters
    ----------
    pairs : sequence of (a_b, a_s)
        Body-frame and spatial-frame accelerations in m/s^2.
    single_pair : bool
        Permit a single direction. The minimal aligning rotation is returned,
        which leaves yaw about that direction undetermined.
    window : int, optional
        Use only the last ``window`` pairs.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (2, 3):
        raise InvalidInputError("pairs must have shape (n, 2, 3)")
    if window is not None:
        if window < 1:
            raise InvalidInputError("window must be >= 1")
        arr = arr[-window:]
    if len(arr) == 0:
        raise InvalidInputError("no acceleration pairs")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("acceleration pairs contain non-finite values")
    a_b, a_s = arr[:, 0], arr[:, 1]
    sv = np.linalg.svd(a_s, compute_uv=False)
    independent = len(sv) >= 2 and sv[1] > 1e-9 * max(sv[0], 1e-300)
    if not independent:
        if not single_pair:
            raise DegenerateConfigurationError(
                "acceleration pairs span fewer than 2 independent directions; "
                "pass single_pair=True to accept a yaw-ambiguous solution"
            )
        return align_vectors(a_s.sum(axis=0), a_b.sum(axis=0))
    B = a_b.T @ a_s
    U, _, Vt = np.linalg.svd(B)
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    if d == 0:
        d = 1.0
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def gravity_from_imu(pairs, R_cb, single_pair: bool = False, window: int | None = None) -> np.ndarray:
    """Camera-frame gravity from IMU acceleration pairs and the body-to-camera rotation."""
    R_bs = estimate_R_bs(pairs, single_pair=single_pair, window=window)
    return gravity_from_spatial(R_cb, R_bs)


def gravity_from_orientation(roll: float, pitch: float, yaw: float, R_cb) -> np.ndarray:
    """Camera-frame gravity from a spatial-to-body orientation given as ZYX angles."""
    return gravity_from_spatial(R_cb, rotation_from_rpy(roll, pitch, yaw))
