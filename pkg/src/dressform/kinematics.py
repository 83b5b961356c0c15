"""Articulated skeleton representation and forward kinematics.

Joint positions are plain ``(n, 3)`` float arrays in meters and cloth masks
are ``(n,)`` boolean arrays; only the tree and the pose get their own types.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .rotations import is_rotation

ROOT = -1

# 24-joint layout following the usual SMPL ordering (parents precede children).
JOINT_NAMES = (
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
)
JOINT_PARENTS = (ROOT, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21)

# Rest joint locations of the procedural template (meters, y up, +x = subject's
# left, +z = front). Pelvis at the origin; soles at y=-0.92, head top at y=0.78.
# Spine and leg chains are vertical and the arm chain horizontal (T-pose).
DEFAULT_REST_JOINTS = np.array(
    [
        [0.00, 0.00, 0.00],  # pelvis
        [0.09, 0.00, 0.00],  # left_hip
        [-0.09, 0.00, 0.00],  # right_hip
        [0.00, 0.12, 0.00],  # spine1
        [0.09, -0.46, 0.00],  # left_knee
        [-0.09, -0.46, 0.00],  # right_knee
        [0.00, 0.26, 0.00],  # spine2
        [0.09, -0.92, 0.00],  # left_ankle
        [-0.09, -0.92, 0.00],  # right_ankle
        [0.00, 0.44, 0.00],  # spine3
        [0.09, -0.88, 0.14],  # left_foot
        [-0.09, -0.88, 0.14],  # right_foot
        [0.00, 0.56, 0.00],  # neck
        [0.07, 0.44, 0.00],  # left_collar
        [-0.07, 0.44, 0.00],  # right_collar
        [0.00, 0.78, 0.00],  # head
        [0.18, 0.44, 0.00],  # left_shoulder
        [-0.18, 0.44, 0.00],  # right_shoulder
        [0.45, 0.44, 0.00],  # left_elbow
        [-0.45, 0.44, 0.00],  # right_elbow
        [0.70, 0.44, 0.00],  # left_wrist
        [-0.70, 0.44, 0.00],  # right_wrist
        [0.80, 0.44, 0.00],  # left_hand
        [-0.80, 0.44, 0.00],  # right_hand
    ]
)


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KinematicTree:
    """Joint hierarchy with rest-pose bone offsets.

    ``offsets[k]`` is the bone from ``parents[k]`` to joint ``k`` expressed in
    the parent's frame at rest. The root row is carried along but never used
    by forward kinematics.
    """

    parents: tuple
    offsets: np.ndarray
    names: tuple

    @property
    def joint_count(self) -> int:
        return len(self.parents)

    @property
    def root(self) -> int:
        return self.parents.index(ROOT)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown joint name {name!r}") from None

    def children(self, j: int) -> list[int]:
        return [k for k, p in enumerate(self.parents) if p == j]

    def primary_child(self, j: int) -> Optional[int]:
        """Lowest-index child; the bone that drives joint ``j``'s swing in IK."""
        for k in range(j + 1, self.joint_count):
            if self.parents[k] == j:
                return k
        return None

    def with_offsets(self, offsets) -> "KinematicTree":
        return build_tree([None if p == ROOT else p for p in self.parents], offsets, self.names)


def build_tree(parents: Sequence[Optional[int]], rest_offsets, names: Sequence[str]) -> KinematicTree:
    """Validate and assemble a :class:`KinematicTree`.

    ``parents`` uses ``None`` for the root and must list every parent before
    its children.
    """
    parents = list(parents)
    names = [str(s) for s in names]
    offsets = np.asarray(rest_offsets, dtype=float)
    n = len(parents)
    if n == 0:
        raise InputError("a tree needs at least one joint")
    if len(names) != n or offsets.shape != (n, 3):
        raise InputError(
            f"parents ({n}), names ({len(names)}) and offsets {offsets.shape} must describe the same joints"
        )
    if len(set(names)) != n:
        dup = sorted({s for s in names if names.count(s) > 1})
        raise InputError(f"duplicate joint names: {dup}")
    if not np.all(np.isfinite(offsets)):
        raise InputError("rest offsets must be finite")

    roots = [k for k, p in enumerate(parents) if p is None]
    if len(roots) != 1:
        raise InputError(f"expected exactly one root, found {len(roots)}: {[names[k] for k in roots]}")
    parsed = []
    for k, p in enumerate(parents):
        if p is None:
            parsed.append(ROOT)
            continue
        if isinstance(p, bool) or not isinstance(p, (int, np.integer)):
            raise InputError(f"parent of joint {names[k]!r} must be an index or None, got {p!r}")
        p = int(p)
        if p == k:
            raise InputError(f"cycle detected: joint {names[k]!r} is its own parent")
        if p < 0 or p >= n:
            raise InputError(f"parent index {p} of joint {names[k]!r} is out of range")
        if p > k:
            raise InputError(
                f"joint {names[k]!r} references parent {names[p]!r} that comes later; "
                "parents must precede children (cycle or forward reference)"
            )
        length = np.linalg.norm(offsets[k])
        if not length > 0.0:
            raise InputError(f"zero-length bone into joint {names[k]!r}")
        parsed.append(p)
    return KinematicTree(parents=tuple(parsed), offsets=_frozen(offsets), names=tuple(names))


def default_tree() -> KinematicTree:
    """24-joint humanoid tree with the template rest offsets."""
    offsets = np.zeros_like(DEFAULT_REST_JOINTS)
    for k, p in enumerate(JOINT_PARENTS):
        offsets[k] = DEFAULT_REST_JOINTS[k] - (DEFAULT_REST_JOINTS[p] if p != ROOT else 0.0)
    parents = [None if p == ROOT else p for p in JOINT_PARENTS]
    return build_tree(parents, offsets, JOINT_NAMES)


def tree_from_joints(template: KinematicTree, joints) -> KinematicTree:
    """Same topology as ``template`` with offsets measured from rest ``joints``.

    The root row stores the root joint's rest location.
    """
    joints = np.asarray(joints, dtype=float)
    offsets = np.empty_like(joints)
    for k, p in enumerate(template.parents):
        offsets[k] = joints[k] - joints[p] if p != ROOT else joints[k]
    return template.with_offsets(offsets)


@dataclass(frozen=True, eq=False)
class Pose:
    """Per-joint local rotations (relative to the parent) plus root translation."""

    rotations: np.ndarray
    root_translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotations, dtype=float)
        t = np.asarray(self.root_translation, dtype=float)
        if R.ndim != 3 or R.shape[1:] != (3, 3):
            raise InputError(f"rotations must have shape (n, 3, 3), got {R.shape}")
        if t.shape != (3,):
            raise InputError(f"root translation must be a 3-vector, got shape {t.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise InputError("pose contains non-finite values")
        bad = np.flatnonzero(~is_rotation(R))
        if bad.size:
            raise InputError(f"rotations at joints {bad.tolist()} are not proper orthonormal matrices")
        object.__setattr__(self, "rotations", _frozen(R))
        object.__setattr__(self, "root_translation", _frozen(t))

    @property
    def joint_count(self) -> int:
        return self.rotations.shape[0]

    @classmethod
    def identity(cls, n: int, root_translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(np.tile(np.eye(3), (n, 1, 1)), np.asarray(root_translation, dtype=float))

    def replace(self, rotations=None, root_translation=None) -> "Pose":
        return Pose(
            self.rotations if rotations is None else rotations,
            self.root_translation if root_translation is None else root_translation,
        )


def _check_count(tree: KinematicTree, n: int, what: str) -> None:
    if n != tree.joint_count:
        raise InputError(f"{what} has {n} joints but the tree has {tree.joint_count}")


def global_transforms(tree: KinematicTree, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Global rotations ``(n, 3, 3)`` and joint positions ``(n, 3)``."""
    _check_count(tree, pose.joint_count, "pose")
    n = tree.joint_count
    R = pose.rotations
    G = np.empty((n, 3, 3))
    P = np.empty((n, 3))
    for k, p in enumerate(tree.parents):
        if p == ROOT:
            G[k] = R[k]
            P[k] = pose.root_translation
        else:
            G[k] = G[p] @ R[k]
            P[k] = P[p] + G[p] @ tree.offsets[k]
    return G, P


def forward_kinematics(tree: KinematicTree, pose: Pose) -> np.ndarray:
    """Joint positions for ``pose``; the root sits at ``pose.root_translation``."""
    return global_transforms(tree, pose)[1]


def bone_vectors(tree: KinematicTree, joints) -> np.ndarray:
    """One vector per non-root joint, ``joints[k] - joints[parent[k]]``, in joint order."""
    joints = np.asarray(joints, dtype=float)
    if joints.ndim != 2 or joints.shape[1] != 3:
        raise InputError(f"joints must have shape (n, 3), got {joints.shape}")
    _check_count(tree, joints.shape[0], "joint set")
    idx = np.array([k for k, p in enumerate(tree.parents) if p != ROOT], dtype=int)
    par = np.array([tree.parents[k] for k in idx], dtype=int)
    return joints[idx] - joints[par]


def cloth_mask(tree: KinematicTree, covered: Sequence[str]) -> np.ndarray:
    """Boolean per-joint mask from a list of covered joint names."""
    mask = np.zeros(tree.joint_count, dtype=bool)
    for name in covered:
        mask[tree.index(name)] = True
    return mask


def check_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (n,) or mask.dtype != bool:
        raise InputError(f"cloth mask must be a boolean array of length {n}, got {mask.dtype} {mask.shape}")
    return mask


# ---------------------------------------------------------------- file formats


def tree_to_json(tree: KinematicTree) -> dict:
    return {
        "joints": [
            {"name": name, "parent": None if p == ROOT else p, "offset": [float(x) for x in off]}
            for name, p, off in zip(tree.names, tree.parents, tree.offsets)
        ]
    }


def tree_from_json(doc: dict) -> KinematicTree:
    try:
        joints = doc["joints"]
        return build_tree(
            [j.get("parent") for j in joints], [j["offset"] for j in joints], [j["name"] for j in joints]
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed skeleton document: {exc!r}") from None


def pose_to_json(pose: Pose) -> dict:
    return {
        "rotations": [[float(x) for x in R.reshape(9)] for R in pose.rotations],
        "root_translation": [float(x) for x in pose.root_translation],
    }


def pose_from_json(doc: dict) -> Pose:
    try:
        R = np.asarray(doc["rotations"], dtype=float)
        t = np.asarray(doc["root_translation"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed pose document: {exc!r}") from None
    if R.ndim != 2 or R.shape[1] != 9:
        raise InputError(f"pose rotations must be rows of 9 numbers, got shape {R.shape}")
    return Pose(R.reshape(-1, 3, 3), t)


def load_json(path) -> dict:
    """Read a JSON file; decode errors surface as :class:`InputError` with the location."""
    path = Path(path)
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def dump_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
