"""Independent reference implementations used as test oracles."""
import math

import numpy as np

from dressform.kinematics import ROOT, Pose
from dressform.rotations import random_rotation


def random_pose(tree, rng, max_angle=math.pi, translation_scale=1.0):
    R = np.stack([random_rotation(rng, max_angle) for _ in range(tree.joint_count)])
    return Pose(R, rng.normal(size=3) * translation_scale)


def axis_angle_matrix(axis, angle):
    """Rotation matrix from the quaternion of (axis, angle); no shared code with the package."""
    x, y, z = np.asarray(axis, float) / np.linalg.norm(axis)
    w, s = math.cos(angle / 2), math.sin(angle / 2)
    x, y, z = x * s, y * s, z * s
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def chain_to_root(parents, k):
    chain = [k]
    while parents[chain[-1]] != ROOT:
        chain.append(parents[chain[-1]])
    return chain[::-1]


def fk_oracle(tree, pose):
    """Per-joint FK by walking the root-to-joint chain with explicit matrix products."""
    out = np.zeros((tree.joint_count, 3))
    for k in range(tree.joint_count):
        chain = chain_to_root(tree.parents, k)
        pos = np.array(pose.root_translation, dtype=float)
        rot = np.eye(3)
        for a, b in zip(chain[:-1], chain[1:]):
            rot = rot @ pose.rotations[a]
            pos = pos + rot @ tree.offsets[b]
        out[k] = pos
    return out
