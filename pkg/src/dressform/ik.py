"""Analytic inverse kinematics by twist-swing decomposition.

Every joint with children is driven by its *primary* child (lowest index).
The local rotation of joint ``j`` is ``swing @ twist``: the twist spins about
the rest bone ``t`` of the primary child and the swing is the minimal
rotation carrying ``t`` onto the observed bone ``p`` (expressed in the frame
of ``j``'s parent). Leaf joints get the identity. The root orientation is an
explicit input; :func:`fit_root_rotation` estimates it from the torso.

Twist angles are stored per non-root joint ``k`` (joint order, root
skipped); entry ``k`` is the twist of ``parent[k]`` about bone ``k``. Only
entries of primary-child bones whose parent is not the root are consumed.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateError, InputError
from .kinematics import ROOT, KinematicTree, Pose
from .rotations import rodrigues

__all__ = [
    "rodrigues",
    "swing_from_vectors",
    "twist_rotation",
    "twist_angle",
    "solve_ik",
    "extract_twists",
    "fit_root_rotation",
    "wrap_angle",
]

PARALLEL_TOL = 1e-8


def _rot(ax: float, ay: float, az: float, s: float, c: float) -> np.ndarray:
    # I + s K + (1 - c) K^2 written out for a unit axis
    v = 1.0 - c
    return np.array(
        [
            [c + v * ax * ax, v * ax * ay - s * az, v * ax * az + s * ay],
            [v * ax * ay + s * az, c + v * ay * ay, v * ay * az - s * ax],
            [v * ax * az - s * ay, v * ay * az + s * ax, c + v * az * az],
        ]
    )


def _fallback_axis(tx: float, ty: float, tz: float) -> tuple[float, float, float]:
    """Unit vector orthogonal to unit t: t x e1, or t x e2 when t is along e1."""
    # t x e1 = (0, tz, -ty)
    n = math.hypot(ty, tz)
    if n >= 1e-6:
        return 0.0, tz / n, -ty / n
    # t x e2 = (-tz, 0, tx)
    n = math.hypot(tz, tx)
    return -tz / n, 0.0, tx / n


def _swing(t, p, what: str = "vector") -> np.ndarray:
    tx, ty, tz = (float(v) for v in t)
    px, py, pz = (float(v) for v in p)
    tn = math.sqrt(tx * tx + ty * ty + tz * tz)
    pn = math.sqrt(px * px + py * py + pz * pz)
    if tn == 0.0 or pn == 0.0:
        raise DegenerateError(f"zero-length {what}")
    cx, cy, cz = ty * pz - tz * py, tz * px - tx * pz, tx * py - ty * px
    cn = math.sqrt(cx * cx + cy * cy + cz * cz)
    denom = tn * pn
    cos_a = (tx * px + ty * py + tz * pz) / denom
    sin_a = cn / denom
    if sin_a < PARALLEL_TOL:
        if cos_a > 0.0:
            return np.eye(3)
        ax, ay, az = _fallback_axis(tx / tn, ty / tn, tz / tn)
        return _rot(ax, ay, az, 0.0, -1.0)
    return _rot(cx / cn, cy / cn, cz / cn, sin_a, cos_a)


def swing_from_vectors(t, p) -> np.ndarray:
    """Minimal rotation taking the direction of ``t`` onto that of ``p``.

    The axis is ``t x p`` normalized. Parallel inputs give the identity;
    antiparallel inputs give a half turn about a fixed axis orthogonal to
    ``t`` (``t x e1``, or ``t x e2`` when ``t`` lies along ``e1``).
    """
    return _swing(np.asarray(t, dtype=float), np.asarray(p, dtype=float))


def twist_rotation(t, phi: float) -> np.ndarray:
    """Rotation by ``phi`` radians about the direction of ``t``."""
    t = np.asarray(t, dtype=float)
    n = float(np.linalg.norm(t))
    if n == 0.0:
        raise DegenerateError("zero-length twist axis")
    ax, ay, az = t / n
    return _rot(ax, ay, az, math.sin(phi), math.cos(phi))


def wrap_angle(phi):
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(phi, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2 * np.pi, wrapped)
    return wrapped if np.ndim(wrapped) else float(wrapped)


def twist_angle(R: np.ndarray, t) -> float:
    """Angle of the twist component of ``R`` about ``t``, in (-pi, pi].

    ``R`` is split as ``swing_from_vectors(t, R t) @ twist``.
    """
    t = np.asarray(t, dtype=float)
    T = _swing(t, R @ t).T @ R
    tx, ty, tz = t / np.linalg.norm(t)
    ux, uy, uz = _fallback_axis(tx, ty, tz)
    u = np.array([ux, uy, uz])
    v = T @ u
    cross = np.array([uy * v[2] - uz * v[1], uz * v[0] - ux * v[2], ux * v[1] - uy * v[0]])
    phi = math.atan2(tx * cross[0] + ty * cross[1] + tz * cross[2], float(u @ v))
    return phi if phi > -math.pi else math.pi


def _twist_index(tree: KinematicTree) -> dict[int, int]:
    idx = {}
    i = 0
    for k, p in enumerate(tree.parents):
        if p != ROOT:
            idx[k] = i
            i += 1
    return idx


def solve_ik(tree: KinematicTree, joints, twists, root_rotation=None, root_translation=None) -> Pose:
    """Recover local rotations from joint positions and twist angles.

    The returned pose reproduces every primary-child bone direction of
    ``joints`` exactly; bone lengths follow the tree. ``root_rotation``
    defaults to :func:`fit_root_rotation`; ``root_translation`` defaults to
    the observed root position.
    """
    joints = np.asarray(joints, dtype=float)
    n = tree.joint_count
    if joints.shape != (n, 3):
        raise InputError(f"joints must have shape ({n}, 3), got {joints.shape}")
    twists = np.asarray(twists, dtype=float)
    if twists.shape != (n - 1,):
        raise InputError(f"expected {n - 1} twist angles, got shape {twists.shape}")
    for k, p in enumerate(tree.parents):
        if p != ROOT and not np.linalg.norm(joints[k] - joints[p]) > 0.0:
            raise DegenerateError(f"joint {tree.names[k]!r} coincides with its parent {tree.names[p]!r}")

    root = tree.root
    if root_rotation is None:
        root_rotation = fit_root_rotation(tree, joints)
    root_rotation = np.asarray(root_rotation, dtype=float)
    tw = _twist_index(tree)

    R = np.empty((n, 3, 3))
    G = np.empty((n, 3, 3))
    for j, p in enumerate(tree.parents):
        if j == root:
            R[j] = root_rotation
            G[j] = root_rotation
            continue
        c = tree.primary_child(j)
        if c is None:
            R[j] = np.eye(3)
        else:
            t = tree.offsets[c]
            target = G[p].T @ (joints[c] - joints[j])
            R[j] = _swing(t, target, f"bone into {tree.names[c]!r}") @ twist_rotation(t, twists[tw[c]])
        G[j] = G[p] @ R[j]
    if root_translation is None:
        root_translation = joints[root]
    return Pose(R, np.asarray(root_translation, dtype=float))


def extract_twists(tree: KinematicTree, pose: Pose) -> np.ndarray:
    """Twist angles that let :func:`solve_ik` rebuild ``pose`` from its own FK.

    Entries that IK does not consume are zero.
    """
    n = tree.joint_count
    if pose.joint_count != n:
        raise InputError(f"pose has {pose.joint_count} joints but the tree has {n}")
    tw = _twist_index(tree)
    out = np.zeros(n - 1)
    for j, p in enumerate(tree.parents):
        if p == ROOT:
            continue
        c = tree.primary_child(j)
        if c is not None:
            out[tw[c]] = twist_angle(pose.rotations[j], tree.offsets[c])
    return out


def fit_root_rotation(tree: KinematicTree, joints) -> np.ndarray:
    """Root orientation from the triangle spanned by the root's first three children.

    The rest triangle normal is swung onto the observed normal, then a twist
    about that normal aligns the first-to-second child edge. Exact when the
    observed torso is a rotated copy of the rest one.
    """
    joints = np.asarray(joints, dtype=float)
    root = tree.root
    kids = tree.children(root)
    if len(kids) < 3:
        raise InputError("root rotation fit needs three children of the root; pass root_rotation explicitly")
    a, b, c = kids[:3]
    rest = [tree.offsets[k] for k in (a, b, c)]
    obs = [joints[k] - joints[root] for k in (a, b, c)]
    n_rest = np.cross(rest[1] - rest[0], rest[2] - rest[0])
    n_obs = np.cross(obs[1] - obs[0], obs[2] - obs[0])
    if np.linalg.norm(n_rest) < 1e-12 or np.linalg.norm(n_obs) < 1e-12:
        raise DegenerateError("torso triangle is degenerate; cannot fit root rotation")
    S = _swing(n_rest, n_obs)
    nh = n_obs / np.linalg.norm(n_obs)
    e_rest = S @ (rest[0] - rest[1])
    e_obs = obs[0] - obs[1]
    e_obs = e_obs - nh * (nh @ e_obs)
    phi = math.atan2(float(nh @ np.cross(e_rest, e_obs)), float(e_rest @ e_obs))
    return twist_rotation(nh, phi) @ S
