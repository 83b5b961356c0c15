"""Rotation-matrix helpers.

Matrices are the stored representation everywhere in the package; axis-angle
and quaternions only appear at the edges (file formats, random sampling).
"""
from __future__ import annotations

import numpy as np

from .errors import InputError

UNIT_TOL = 1e-9


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix K such that K @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(axis, sin_alpha: float, cos_alpha: float) -> np.ndarray:
    """Rotation about a unit ``axis`` given the sine and cosine of the angle.

    Returns ``I + sin(a) K + (1 - cos(a)) K^2`` with K the cross-product
    matrix of ``axis``.
    """
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > UNIT_TOL:
        raise InputError(f"rotation axis must have unit length, got norm {norm!r}")
    if abs(sin_alpha * sin_alpha + cos_alpha * cos_alpha - 1.0) > UNIT_TOL:
        raise InputError("sin^2 + cos^2 must equal 1")
    K = skew(axis)
    return np.eye(3) + sin_alpha * K + (1.0 - cos_alpha) * (K @ K)


def axis_angle_to_matrix(rotvec) -> np.ndarray:
    rotvec = np.asarray(rotvec, dtype=float)
    angle = float(np.linalg.norm(rotvec))
    if angle == 0.0:
        return np.eye(3)
    return rodrigues(rotvec / angle, np.sin(angle), np.cos(angle))


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Geodesic angle of rotation(s) ``R`` in [0, pi].

    Uses atan2 of the skew and symmetric parts, which stays accurate near 0
    and pi where a bare arccos of the trace loses digits.
    """
    R = np.asarray(R, dtype=float)
    w = np.stack(
        [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
        axis=-1,
    )
    s = 0.5 * np.linalg.norm(w, axis=-1)
    c = 0.5 * (R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2] - 1.0)
    return np.arctan2(s, c)


def geodesic_distance(Ra: np.ndarray, Rb: np.ndarray) -> np.ndarray:
    """Angle of ``Ra^T Rb``; broadcasts over leading axes."""
    rel = np.swapaxes(Ra, -1, -2) @ Rb
    return rotation_angle(rel)


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    angle = float(rotation_angle(R))
    if angle < 1e-12:
        return np.zeros(3)
    if np.pi - angle < 1e-6:
        # near pi the skew part vanishes; read the axis off R + I instead
        B = 0.5 * (R + np.eye(3))
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k] / np.sqrt(B[k, k])
        return axis * angle
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w / np.linalg.norm(w) * angle


def quaternion_to_matrix(q) -> np.ndarray:
    """Unit quaternion in (w, x, y, z) order to a rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to a unit quaternion (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Elementwise check that ``R`` (..., 3, 3) is orthonormal with det +1."""
    R = np.asarray(R, dtype=float)
    eye = np.eye(3)
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max(axis=(-2, -1)) <= tol
    det = np.abs(np.linalg.det(R) - 1.0) <= tol
    return ortho & det


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    while np.linalg.norm(v) < 1e-12:
        v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi) -> np.ndarray:
    """Rotation with uniform axis and angle uniform in [0, max_angle)."""
    axis = random_unit_vector(rng)
    angle = rng.random() * max_angle
    return rodrigues(axis, np.sin(angle), np.cos(angle))
