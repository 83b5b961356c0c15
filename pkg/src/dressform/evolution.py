"""Pose diversification by donor crossover and bounded mutation.

Joints under clothing are trusted and never touched; every other joint can be
transplanted from a database pose that agrees on the clothed joints, then
perturbed by a small random rotation.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .kinematics import Pose, check_mask, pose_from_json, pose_to_json
from .rotations import random_rotation, rotation_angle


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """Stable 63-bit sub-seed from ``(seed, label, index)``."""
    digest = hashlib.sha256(f"{int(seed)}:{label}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass(frozen=True)
class MutationConfig:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise InputError(f"epsilon must be a nonnegative finite angle, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class PoseDatabase:
    poses: tuple
    tags: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        tags = tuple(str(t) for t in self.tags)
        if len(poses) != len(tags):
            raise InputError("every database pose needs a tag")
        if len({p.joint_count for p in poses}) > 1:
            raise InputError("database poses disagree on joint count")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "tags", tags)
        # stacked rotations speed up distance queries
        stack = np.stack([p.rotations for p in poses]) if poses else np.zeros((0, 0, 3, 3))
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    def __len__(self) -> int:
        return len(self.poses)

    @classmethod
    def from_poses(cls, poses, tags=None) -> "PoseDatabase":
        poses = list(poses)
        return cls(tuple(poses), tuple(tags) if tags is not None else tuple(f"pose_{i}" for i in range(len(poses))))

    def save_jsonl(self, path) -> None:
        lines = [json.dumps({"tag": t, **pose_to_json(p)}) for p, t in zip(self.poses, self.tags)]
        Path(path).write_text("".join(line + "\n" for line in lines))

    @classmethod
    def load_jsonl(cls, path) -> "PoseDatabase":
        poses, tags = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                poses.append(pose_from_json(rec))
                tags.append(rec.get("tag", f"pose_{len(tags)}"))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}:{exc.colno}: {exc.msg}") from None
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
        return cls(tuple(poses), tuple(tags))


METRICS = ("geodesic", "chordal")


def _joint_distance(Ra: np.ndarray, Rb: np.ndarray, metric: str) -> np.ndarray:
    if metric == "geodesic":
        return rotation_angle(np.swapaxes(Ra, -1, -2) @ Rb)
    if metric == "chordal":
        return np.linalg.norm(Ra - Rb, axis=(-2, -1))
    raise InputError(f"unknown rotation metric {metric!r}; expected one of {METRICS}")


def pose_distance(a: Pose, b: Pose, mask, metric: str = "geodesic") -> float:
    """Sum over covered joints of the geodesic angle (or Frobenius chordal distance)."""
    if a.joint_count != b.joint_count:
        raise InputError(f"poses have {a.joint_count} and {b.joint_count} joints")
    mask = check_mask(mask, a.joint_count)
    return float(_joint_distance(a.rotations[mask], b.rotations[mask], metric).sum())


def knn_match(db: PoseDatabase, query: Pose, mask, k: int = 5, metric: str = "geodesic") -> list[int]:
    """Indices of the ``k`` nearest entries by :func:`pose_distance`, ties to lower index."""
    if len(db) == 0:
        raise InputError("pose database is empty")
    if not 1 <= k <= len(db):
        raise InputError(f"k must be in [1, {len(db)}], got {k}")
    if query.joint_count != db.poses[0].joint_count:
        raise InputError(f"query has {query.joint_count} joints, database poses have {db.poses[0].joint_count}")
    mask = check_mask(mask, query.joint_count)
    d = _joint_distance(query.rotations[mask][None], db._stack[:, mask], metric).sum(axis=1)
    order = np.lexsort((np.arange(len(db)), d))
    return [int(i) for i in order[:k]]


def crossover(estimate: Pose, donor: Pose, mask) -> Pose:
    """Covered joints from ``estimate``, the rest from ``donor``; translation from ``estimate``."""
    if estimate.joint_count != donor.joint_count:
        raise InputError(f"poses have {estimate.joint_count} and {donor.joint_count} joints")
    mask = check_mask(mask, estimate.joint_count)
    R = np.where(mask[:, None, None], estimate.rotations, donor.rotations)
    return Pose(R, estimate.root_translation)


def mutate(pose: Pose, mask, config: MutationConfig) -> Pose:
    """Left-compose each uncovered joint with a random rotation of angle below epsilon."""
    mask = check_mask(mask, pose.joint_count)
    if config.epsilon == 0:
        return pose
    rng = np.random.default_rng(config.seed)
    R = pose.rotations.copy()
    for j in np.flatnonzero(~mask):
        R[j] = random_rotation(rng, config.epsilon) @ R[j]
    return Pose(R, pose.root_translation)


def generate_variants(
    db: PoseDatabase, estimate: Pose, mask, count: int, config: MutationConfig, k: int = 5, metric: str = "geodesic"
) -> list[Pose]:
    """``count`` crossover+mutation variants cycling over the ``k`` nearest donors."""
    if count < 0:
        raise InputError("count must be nonnegative")
    k = min(k, len(db)) if len(db) else k
    nearest = knn_match(db, estimate, mask, k, metric)
    out = []
    for i in range(count):
        child = crossover(estimate, db.poses[nearest[i % len(nearest)]], mask)
        out.append(mutate(child, mask, MutationConfig(config.epsilon, derive_seed(config.seed, "mutate", i))))
    return out
