"""Procedural SMPL-style parametric body.

A template mesh built from elliptical rings around the 24-joint T-pose
skeleton, deformed by linear shape blendshapes, with joints regressed from
vertex rings and posing by linear blend skinning.

The blendshapes are designed so that the anthropometric measurements in
:mod:`dressform.measurements` are exact affine functions of ``beta`` while
every coefficient stays within ``BodyModel.beta_limit``:

====  ===================  ==========================================
index component            effect
====  ===================  ==========================================
0     height               vertical scale about the pelvis
1     chest width          lateral scale of the chest plateau
2     waist width          lateral scale of the waist plateau
3     hips width           lateral scale of the hips plateau
4     shoulder width       arms slide outward
5     arm length           arms stretch from the shoulder
6     leg length           legs stretch downward from the hips
7     torso length         pelvis-to-neck stretch
8     torso depth          front-back scale of the trunk (unobserved)
9     limb girth           radial scale of arms and legs (unobserved)
10+   trunk depth bumps    localized front-back scale (unobserved)
====  ===================  ==========================================
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .kinematics import (
    DEFAULT_REST_JOINTS,
    JOINT_NAMES,
    KinematicTree,
    Pose,
    _frozen,
    default_tree,
    global_transforms,
    tree_from_joints,
    tree_to_json,
    tree_from_json,
)

PART_NAMES = ("torso", "head", "left_arm", "right_arm", "left_leg", "right_leg", "left_foot", "right_foot")
COMPONENT_NAMES = (
    "height",
    "chest_width",
    "waist_width",
    "hips_width",
    "shoulder_width",
    "arm_length",
    "leg_length",
    "torso_length",
    "torso_depth",
    "limb_girth",
)
BETA_LIMIT = 2.0

J = {name: i for i, name in enumerate(JOINT_NAMES)}

# Trunk rings: (y, half-width, half-depth, chest/waist/hips blend weights).
# Widths are constant across each plateau so the measurement bands can slide
# up and down with the legs and torso without changing the measured width.
_HIPS = [-0.11, -0.09, -0.07, -0.05, -0.03, -0.015, 0.0, 0.012, 0.024]
_WAIST = [0.044, 0.06, 0.08, 0.10, 0.12, 0.14, 0.158, 0.172]
_CHEST = [0.24, 0.26, 0.28, 0.30, 0.32, 0.34, 0.355, 0.37]
_TRUNK = (
    [(-0.125, 0.165, 0.10, (0.0, 0.0, 0.5))]
    + [(y, 0.175, 0.11, (0.0, 0.0, 1.0)) for y in _HIPS]
    + [(0.034, 0.16, 0.10, (0.0, 0.5, 0.5))]
    + [(y, 0.145, 0.095, (0.0, 1.0, 0.0)) for y in _WAIST]
    + [
        (0.188, 0.150, 0.10, (0.0, 0.5, 0.0)),
        (0.206, 0.155, 0.10, (0.2, 0.2, 0.0)),
        (0.224, 0.160, 0.105, (0.5, 0.0, 0.0)),
    ]
    + [(y, 0.165, 0.11, (1.0, 0.0, 0.0)) for y in _CHEST]
    + [
        (0.40, 0.175, 0.10, (0.5, 0.0, 0.0)),
        (0.44, 0.19, 0.09, (0.0, 0.0, 0.0)),
        (0.48, 0.14, 0.08, (0.0, 0.0, 0.0)),
        (0.52, 0.06, 0.055, (0.0, 0.0, 0.0)),
        (0.56, 0.055, 0.05, (0.0, 0.0, 0.0)),
    ]
)
_TRUNK_BOTTOM = -0.135
_HEAD = [(0.58, 0.06, 0.065), (0.62, 0.085, 0.095), (0.67, 0.095, 0.105), (0.72, 0.085, 0.095), (0.755, 0.055, 0.06)]
_HEAD_TOP = 0.78
# left leg rings (y, radius) around x=0.09
_LEG_X = 0.09
_LEG = [
    (0.0, 0.075),
    (-0.08, 0.072),
    (-0.16, 0.068),
    (-0.24, 0.064),
    (-0.32, 0.06),
    (-0.40, 0.055),
    (-0.46, 0.05),
    (-0.54, 0.05),
    (-0.62, 0.048),
    (-0.70, 0.044),
    (-0.78, 0.04),
    (-0.86, 0.036),
    (-0.92, 0.035),
]
# left foot: rectangular rings along z
_FOOT_Z = [-0.04, 0.05, 0.14]
_FOOT_HALF_W = 0.045
_FOOT_TOP = -0.84
_SOLE = -0.92
# left arm rings (x, radius) around y=0.44
_ARM_Y = 0.44
_ARM = [
    (0.18, 0.055),
    (0.25, 0.05),
    (0.32, 0.046),
    (0.39, 0.042),
    (0.45, 0.04),
    (0.52, 0.037),
    (0.58, 0.034),
    (0.64, 0.031),
    (0.70, 0.03),
    (0.75, 0.035),
    (0.80, 0.025),
]
_ARM_TIP = 0.83
_SHOULDER_X = 0.18
_NECK_Y = 0.56
_HEIGHT = _HEAD_TOP - _SOLE

# (trunk ring points, limb ring points, head ring points), richest first
_RESOLUTIONS = [(24, 16, 16), (16, 12, 12), (16, 10, 12), (12, 8, 12), (12, 8, 8), (8, 8, 8), (8, 6, 8), (8, 4, 8), (4, 4, 4)]


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InputError(f"vertices must have shape (V, 3), got {v.shape}")
        if f.size and (f.ndim != 2 or f.shape[1] != 3):
            raise InputError(f"faces must have shape (F, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("mesh has non-finite vertex coordinates")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f.reshape(-1, 3), np.int64))


@dataclass(frozen=True, eq=False)
class BodyModel:
    """Template mesh, shape blendshapes, joint regressor and skinning weights."""

    template_vertices: np.ndarray
    faces: np.ndarray
    blendshapes: np.ndarray  # (m, V, 3)
    joint_regressor: np.ndarray  # (n, V)
    skin_weights: np.ndarray  # (V, n)
    tree: KinematicTree
    vertex_part: np.ndarray  # (V,) index into part_names
    part_names: tuple = PART_NAMES
    beta_limit: float = BETA_LIMIT

    def __post_init__(self):
        v = np.asarray(self.template_vertices, dtype=float)
        V = v.shape[0]
        f = np.asarray(self.faces, dtype=np.int64)
        B = np.asarray(self.blendshapes, dtype=float)
        R = np.asarray(self.joint_regressor, dtype=float)
        W = np.asarray(self.skin_weights, dtype=float)
        n = self.tree.joint_count
        if v.shape != (V, 3) or B.ndim != 3 or B.shape[1:] != (V, 3):
            raise InputError("template vertices and blendshapes must be (V, 3) and (m, V, 3)")
        if f.size and (f.min() < 0 or f.max() >= V):
            raise InputError("face index out of range")
        if R.shape != (n, V) or W.shape != (V, n):
            raise InputError(f"regressor must be ({n}, {V}) and skin weights ({V}, {n})")
        if R.min() < 0 or np.abs(R.sum(axis=1) - 1).max() > 1e-9:
            raise InputError("joint regressor rows must be nonnegative and sum to 1")
        if W.min() < 0 or np.abs(W.sum(axis=1) - 1).max() > 1e-9:
            raise InputError("skin weight rows must be nonnegative and sum to 1")
        if (W > 0).sum(axis=1).max() > 4:
            raise InputError("a vertex has more than 4 nonzero skin weights")
        object.__setattr__(self, "template_vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f, np.int64))
        object.__setattr__(self, "blendshapes", _frozen(B))
        object.__setattr__(self, "joint_regressor", _frozen(R))
        object.__setattr__(self, "skin_weights", _frozen(W))
        object.__setattr__(self, "vertex_part", _frozen(self.vertex_part, np.int64))
        object.__setattr__(self, "part_names", tuple(self.part_names))

    @property
    def vertex_count(self) -> int:
        return self.template_vertices.shape[0]

    @property
    def shape_dims(self) -> int:
        return self.blendshapes.shape[0]

    def part_mask(self, part: str) -> np.ndarray:
        return self.vertex_part == self.part_names.index(part)


# ------------------------------------------------------------------ synthesis


class _Builder:
    def __init__(self):
        self.verts: list = []
        self.part: list = []
        self.faces: list = []

    def add(self, pts, part: int) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        start = len(self.verts)
        self.verts.extend(pts)
        self.part.extend([part] * len(pts))
        return np.arange(start, start + len(pts))

    def tube(self, rings: list) -> None:
        for a, b in zip(rings[:-1], rings[1:]):
            N = len(a)
            for i in range(N):
                j = (i + 1) % N
                self.faces.append((a[i], b[i], b[j]))
                self.faces.append((a[i], b[j], a[j]))

    def fan(self, ring, center: int, flip: bool = False) -> None:
        N = len(ring)
        for i in range(N):
            a, b = ring[i], ring[(i + 1) % N]
            self.faces.append((center, b, a) if flip else (center, a, b))


def _ring_angles(N: int) -> np.ndarray:
    # N even: vertices at angle 0 and pi give exact lateral extremes
    return 2.0 * np.pi * np.arange(N) / N


def _chain_weights(s_levels, chain, prev=None):
    """Blend weights along a joint chain.

    ``chain`` is a list of (joint, position) sorted by position; ``s`` is a
    scalar coordinate along the chain. Inside each bone the driving joint owns
    the middle 40%; the outer 30% on each side fades to 50/50 with the
    neighbor joint.
    """
    out = []
    for s in s_levels:
        w = {}
        if s <= chain[0][1]:
            w[chain[0][0]] = 1.0
            if prev is not None:
                w = {prev: 0.5, chain[0][0]: 0.5}
        elif s >= chain[-1][1]:
            w[chain[-1][0]] = 1.0
        else:
            for i in range(len(chain) - 1):
                (ja, sa), (jb, sb) = chain[i], chain[i + 1]
                if sa <= s <= sb:
                    u = (s - sa) / (sb - sa)
                    before = chain[i - 1][0] if i > 0 else prev
                    if u < 0.3 and before is not None:
                        wb = 0.5 * (1.0 - u / 0.3)
                        w = {before: wb, ja: 1.0 - wb}
                    elif u > 0.7:
                        wn = 0.5 * (u - 0.7) / 0.3
                        w = {ja: 1.0 - wn, jb: wn}
                    else:
                        w = {ja: 1.0}
                    break
        out.append({k: v for k, v in w.items() if v > 0.0})
    return out


def synth_body_model(joint_count: int = 24, shape_dims: int = 10, vertex_budget: int = 890, seed: int = 0) -> BodyModel:
    """Build the procedural humanoid.

    The richest ring resolution whose vertex count fits ``vertex_budget`` is
    used. ``seed`` only drives the placement of the extra trunk-depth bumps
    (components 10 and up); the rest of the construction is fixed, so equal
    arguments always give bitwise-identical models.
    """
    if joint_count != len(JOINT_NAMES):
        raise InputError(f"the procedural body supports the {len(JOINT_NAMES)}-joint layout only, got {joint_count}")
    if shape_dims < 1:
        raise InputError("shape_dims must be at least 1")
    if vertex_budget < 100:
        raise InputError("vertex_budget must be at least 100")
    for res in _RESOLUTIONS:
        if _vertex_count(*res) <= vertex_budget:
            break
    else:
        raise InputError(
            f"vertex budget {vertex_budget} cannot cover all bones; the coarsest body needs {_vertex_count(*_RESOLUTIONS[-1])}"
        )
    return _build(res, shape_dims, seed)


def _vertex_count(nt: int, nl: int, nh: int) -> int:
    torso = len(_TRUNK) * nt + 1
    head = len(_HEAD) * nh + 1
    leg = len(_LEG) * nl + 1
    foot = len(_FOOT_Z) * 4
    arm = len(_ARM) * nl + 1
    return torso + head + 2 * (leg + foot + arm)


def _build(res, shape_dims: int, seed: int) -> BodyModel:
    nt, nl, nh = res
    P = {name: i for i, name in enumerate(PART_NAMES)}
    b = _Builder()
    reg_rings: dict[str, np.ndarray] = {}

    # trunk
    ang = _ring_angles(nt)
    trunk_rings = []
    trunk_gain = []
    for y, rx, rz, g in _TRUNK:
        pts = np.stack([rx * np.cos(ang), np.full(nt, y), rz * np.sin(ang)], axis=1)
        pts[:, 0] = np.where(np.abs(pts[:, 0]) < 1e-15, 0.0, pts[:, 0])
        idx = b.add(pts, P["torso"])
        trunk_rings.append(idx)
        trunk_gain.extend([g] * nt)
    b.tube(trunk_rings)
    bottom = b.add([0.0, _TRUNK_BOTTOM, 0.0], P["torso"])[0]
    trunk_gain.append((0.0, 0.0, 0.0))
    b.fan(trunk_rings[0], bottom, flip=True)
    trunk_y = [t[0] for t in _TRUNK]
    for name, y in (("pelvis", 0.0), ("spine1", 0.12), ("spine2", 0.26), ("spine3", 0.44), ("neck", _NECK_Y)):
        reg_rings[name] = trunk_rings[trunk_y.index(y)]

    # head
    ang = _ring_angles(nh)
    head_rings = [b.add(np.stack([rx * np.cos(ang), np.full(nh, y), rz * np.sin(ang)], axis=1), P["head"]) for y, rx, rz in _HEAD]
    b.tube(head_rings)
    top = b.add([0.0, _HEAD_TOP, 0.0], P["head"])[0]
    b.fan(head_rings[-1], top)
    reg_rings["head"] = np.array([top])

    # left limbs; the right side is mirrored afterwards
    left_start = len(b.verts)
    ang = _ring_angles(nl)
    leg_rings = [
        b.add(np.stack([_LEG_X + r * np.cos(ang), np.full(nl, y), r * np.sin(ang)], axis=1), P["left_leg"]) for y, r in _LEG
    ]
    b.tube(leg_rings)
    sole_c = b.add([_LEG_X, _SOLE, 0.0], P["left_leg"])[0]
    b.fan(leg_rings[-1], sole_c)
    leg_y = [y for y, _ in _LEG]
    reg_rings["left_hip"] = leg_rings[leg_y.index(0.0)]
    reg_rings["left_knee"] = leg_rings[leg_y.index(-0.46)]
    reg_rings["left_ankle"] = leg_rings[leg_y.index(_SOLE)]

    foot_rings = []
    for z in _FOOT_Z:
        rect = [
            [_LEG_X + _FOOT_HALF_W, _SOLE, z],
            [_LEG_X + _FOOT_HALF_W, _FOOT_TOP, z],
            [_LEG_X - _FOOT_HALF_W, _FOOT_TOP, z],
            [_LEG_X - _FOOT_HALF_W, _SOLE, z],
        ]
        foot_rings.append(b.add(rect, P["left_foot"]))
    b.tube(foot_rings)
    for ring, flip in ((foot_rings[0], True), (foot_rings[-1], False)):
        a0, a1, a2, a3 = ring
        b.faces.extend([(a0, a2, a1), (a0, a3, a2)] if flip else [(a0, a1, a2), (a0, a2, a3)])
    reg_rings["left_foot"] = foot_rings[-1]

    arm_rings = [
        b.add(np.stack([np.full(nl, x), _ARM_Y + r * np.cos(ang), r * np.sin(ang)], axis=1), P["left_arm"]) for x, r in _ARM
    ]
    b.tube(arm_rings)
    tip = b.add([_ARM_TIP, _ARM_Y, 0.0], P["left_arm"])[0]
    b.fan(arm_rings[-1], tip)
    arm_x = [x for x, _ in _ARM]
    reg_rings["left_shoulder"] = arm_rings[arm_x.index(0.18)]
    reg_rings["left_elbow"] = arm_rings[arm_x.index(0.45)]
    reg_rings["left_wrist"] = arm_rings[arm_x.index(0.70)]
    reg_rings["left_hand"] = arm_rings[arm_x.index(0.80)]
    left_stop = len(b.verts)

    # mirror the left limbs onto the right
    offset = left_stop - left_start
    mirrored = np.array(b.verts[left_start:left_stop]) * np.array([-1.0, 1.0, 1.0])
    swap = {P["left_leg"]: P["right_leg"], P["left_foot"]: P["right_foot"], P["left_arm"]: P["right_arm"]}
    for v, part in zip(mirrored, b.part[left_start:left_stop]):
        b.verts.append(v)
        b.part.append(swap[part])
    left_faces = [f for f in b.faces if f[0] >= left_start]
    for f in left_faces:
        b.faces.append((f[0] + offset, f[2] + offset, f[1] + offset))
    for name in list(reg_rings):
        if name.startswith("left_"):
            reg_rings["right_" + name[5:]] = reg_rings[name] + offset

    verts = np.asarray(b.verts, dtype=float)
    part = np.asarray(b.part, dtype=np.int64)
    V = len(verts)
    n = len(JOINT_NAMES)

    # joint regressor: uniform weights over each joint's ring
    reg = np.zeros((n, V))
    for name, idx in reg_rings.items():
        reg[J[name], idx] = 1.0 / len(idx)
    a = DEFAULT_REST_JOINTS[J["left_collar"], 0] / _SHOULDER_X
    for side in ("left", "right"):
        row = reg[J[f"{side}_collar"]]
        row[reg_rings[f"{side}_shoulder"]] += a / nl
        row[reg_rings["spine3"]] += (1.0 - a) / nt

    weights = _skin_weights(verts, part, n)
    blend = _blendshapes(verts, part, np.asarray(trunk_gain + [(0.0, 0.0, 0.0)] * (V - len(trunk_gain))), shape_dims, seed)
    return BodyModel(
        template_vertices=verts,
        faces=np.asarray(b.faces, dtype=np.int64),
        blendshapes=blend,
        joint_regressor=reg,
        skin_weights=weights,
        tree=default_tree(),
        vertex_part=part,
    )


def _skin_weights(verts: np.ndarray, part: np.ndarray, n: int) -> np.ndarray:
    P = {name: i for i, name in enumerate(PART_NAMES)}
    R = DEFAULT_REST_JOINTS
    W = np.zeros((len(verts), n))

    def assign(mask, coord, chain, prev=None):
        idx = np.flatnonzero(mask)
        for i, w in zip(idx, _chain_weights(coord[idx], chain, prev)):
            for j, val in w.items():
                W[i, j] = val

    spine = [(J[k], R[J[k], 1]) for k in ("pelvis", "spine1", "spine2", "spine3", "neck")]
    assign(part == P["torso"], verts[:, 1], spine)
    W[part == P["head"], J["neck"]] = 1.0
    for side, sign in (("left", 1.0), ("right", -1.0)):
        leg = [(J[f"{side}_{k}"], -R[J[f"{side}_{k}"], 1]) for k in ("hip", "knee", "ankle")]
        assign(part == P[f"{side}_leg"], -verts[:, 1], leg, prev=J["pelvis"])
        foot = [(J[f"{side}_ankle"], 0.0), (J[f"{side}_foot"], R[J[f"{side}_foot"], 2])]
        assign(part == P[f"{side}_foot"], verts[:, 2], foot)
        arm = [(J[f"{side}_{k}"], sign * R[J[f"{side}_{k}"], 0]) for k in ("collar", "shoulder", "elbow", "wrist", "hand")]
        assign(part == P[f"{side}_arm"], sign * verts[:, 0], arm)
    return W / W.sum(axis=1, keepdims=True)


def _blendshapes(verts, part, gains, m: int, seed: int) -> np.ndarray:
    P = {name: i for i, name in enumerate(PART_NAMES)}
    V = len(verts)
    x, y, z = verts.T
    torso = part == P["torso"]
    arms = (part == P["left_arm"]) | (part == P["right_arm"])
    legs = (part == P["left_leg"]) | (part == P["right_leg"])
    feet = (part == P["left_foot"]) | (part == P["right_foot"])
    fields = []

    d = np.zeros((V, 3))
    d[:, 1] = y * (0.03 / _HEIGHT)
    fields.append(d)
    for col, gain in enumerate((0.06, 0.08, 0.06)):  # chest, waist, hips
        d = np.zeros((V, 3))
        d[:, 0] = np.where(torso, x * gain * gains[:, col], 0.0)
        fields.append(d)
    d = np.zeros((V, 3))
    d[arms, 0] = 0.01 * np.sign(x[arms])
    fields.append(d)
    d = np.zeros((V, 3))
    d[arms, 0] = 0.04 * np.sign(x[arms]) * (np.abs(x[arms]) - _SHOULDER_X)
    fields.append(d)
    d = np.zeros((V, 3))
    lf = legs | feet
    d[lf, 1] = 0.01 * y[lf] / -_SOLE
    fields.append(d)
    d = np.zeros((V, 3))
    up = (y > 0.0) & ~(legs | feet)
    d[up, 1] = 0.01 * np.minimum(y[up], _NECK_Y) / _NECK_Y
    fields.append(d)
    d = np.zeros((V, 3))
    d[torso, 2] = 0.1 * z[torso]
    fields.append(d)
    d = np.zeros((V, 3))
    d[legs, 0] = 0.1 * (x[legs] - np.sign(x[legs]) * _LEG_X)
    d[legs, 2] = 0.1 * z[legs]
    d[arms, 1] = 0.1 * (y[arms] - _ARM_Y)
    d[arms, 2] = 0.1 * z[arms]
    fields.append(d)

    rng = np.random.default_rng(seed)
    while len(fields) < m:
        center = rng.uniform(-0.1, 0.45)
        width = rng.uniform(0.04, 0.12)
        d = np.zeros((V, 3))
        d[torso, 2] = 0.05 * z[torso] * np.exp(-0.5 * ((y[torso] - center) / width) ** 2)
        fields.append(d)
    return np.stack(fields[:m])


# ------------------------------------------------------------------ operations


def _check_beta(model: BodyModel, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (model.shape_dims,):
        raise InputError(f"expected {model.shape_dims} shape coefficients, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise InputError("shape coefficients must be finite")
    return beta


def shape_mesh(model: BodyModel, beta) -> Mesh:
    """Rest-pose mesh ``template + sum_i beta_i * blendshape_i``."""
    beta = _check_beta(model, beta)
    return Mesh(model.template_vertices + np.tensordot(beta, model.blendshapes, axes=1), model.faces)


def regress_joints(model: BodyModel, rest_mesh: Mesh) -> np.ndarray:
    v = np.asarray(rest_mesh.vertices if isinstance(rest_mesh, Mesh) else rest_mesh, dtype=float)
    if v.shape != (model.vertex_count, 3):
        raise InputError(f"mesh has {v.shape[0]} vertices, model expects {model.vertex_count}")
    return model.joint_regressor @ v


def shaped_tree(model: BodyModel, beta) -> KinematicTree:
    """Kinematic tree whose offsets are the rest joints at shape ``beta``."""
    return tree_from_joints(model.tree, regress_joints(model, shape_mesh(model, beta)))


def posed_joints(model: BodyModel, beta, pose: Pose) -> np.ndarray:
    """Joint positions matching :func:`skin` (root at rest root + translation)."""
    tree = shaped_tree(model, beta)
    root = tree.root
    return global_transforms(tree, pose.replace(root_translation=tree.offsets[root] + pose.root_translation))[1]


def skin(model: BodyModel, beta, pose: Pose) -> Mesh:
    """Linear blend skinning of the shaped mesh.

    ``pose.root_translation`` is added to the rest root location, so the
    identity pose with zero translation returns the rest mesh.
    """
    rest = shape_mesh(model, beta)
    joints = regress_joints(model, rest)
    tree = tree_from_joints(model.tree, joints)
    if pose.joint_count != tree.joint_count:
        raise InputError(f"pose has {pose.joint_count} joints, model has {tree.joint_count}")
    root = tree.root
    G, Pj = global_transforms(tree, pose.replace(root_translation=joints[root] + pose.root_translation))
    b = Pj - np.einsum("nij,nj->ni", G, joints)
    W = model.skin_weights
    M = np.einsum("vn,nij->vij", W, G)
    v = np.einsum("vij,vj->vi", M, rest.vertices) + W @ b
    return Mesh(v, model.faces)


def mirror_index(model: BodyModel, tol: float = 1e-9) -> np.ndarray:
    """Index of each vertex's mirror image across the sagittal plane (x -> -x).

    Raises if some vertex has no mirror partner within ``tol``.
    """
    v = model.template_vertices
    m = v * np.array([-1.0, 1.0, 1.0])
    d = np.linalg.norm(v[None, :, :] - m[:, None, :], axis=2)
    idx = d.argmin(axis=1)
    if d[np.arange(len(v)), idx].max() > tol:
        raise InputError("model is not bilaterally symmetric")
    return idx


# ------------------------------------------------------------------ file formats


def export_obj(mesh: Mesh, path) -> None:
    """Write ``v x y z`` lines then 1-based ``f a b c`` lines, 9 significant digits."""
    v = np.asarray(mesh.vertices)
    if v.shape[0] == 0:
        raise InputError("refusing to export an empty mesh")
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in v]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(mesh.faces)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_obj(path) -> Mesh:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(s) for s in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(s.split("/")[0]) - 1 for s in parts[1:4]])
    return Mesh(np.asarray(verts, dtype=float).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def model_to_json(model: BodyModel) -> dict:
    return {
        "vertices": model.template_vertices.tolist(),
        "faces": model.faces.tolist(),
        "blendshapes": model.blendshapes.tolist(),
        "joint_regressor": model.joint_regressor.tolist(),
        "skin_weights": model.skin_weights.tolist(),
        "tree": tree_to_json(model.tree),
        "vertex_part": model.vertex_part.tolist(),
        "part_names": list(model.part_names),
        "beta_limit": model.beta_limit,
    }


def model_from_json(doc: dict) -> BodyModel:
    try:
        return BodyModel(
            template_vertices=np.asarray(doc["vertices"], dtype=float),
            faces=np.asarray(doc["faces"], dtype=np.int64),
            blendshapes=np.asarray(doc["blendshapes"], dtype=float),
            joint_regressor=np.asarray(doc["joint_regressor"], dtype=float),
            skin_weights=np.asarray(doc["skin_weights"], dtype=float),
            tree=tree_from_json(doc["tree"]),
            vertex_part=np.asarray(doc["vertex_part"], dtype=np.int64),
            part_names=tuple(doc.get("part_names", PART_NAMES)),
            beta_limit=float(doc.get("beta_limit", BETA_LIMIT)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed body model document: {exc!r}") from None
