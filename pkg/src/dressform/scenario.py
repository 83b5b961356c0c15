"""Scenario bundles: what an image front-end would hand to the fitter, plus optional ground truth.

A scenario is a JSON document. Members may be inlined or given as file
names relative to the scenario file::

    {
      "camera": {"focal", "cx", "cy", "width", "height"},
      "skeleton": "skeleton.json",
      "image_joints": "keypoints.json",        # {"points", "visible"}
      "depth_offsets": [...],                  # per-joint depth minus root depth
      "scene_depth": 3.1,                      # optional root depth in meters
      "twists": "twists.json",                 # {"phi": [...]}
      "landmarks": ["landmarks_skirt.json"],
      "cloth_mask": ["pelvis", ...],
      "measurement_noise": 0.01,
      "model": {"shape_dims": 10, "vertex_budget": 890, "seed": 0},
      "ground_truth": {"pose": ..., "beta": ..., "translation": ...}
    }
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .body import BodyModel, posed_joints, regress_joints, shape_mesh, skin, synth_body_model
from .camera import PerspectiveCamera, keypoints_from_json, keypoints_to_json, project
from .errors import InputError
from .evolution import PoseDatabase, derive_seed
from .ik import extract_twists
from .kinematics import (
    KinematicTree,
    Pose,
    cloth_mask,
    dump_json,
    load_json,
    pose_from_json,
    pose_to_json,
    tree_from_joints,
    tree_from_json,
    tree_to_json,
)
from .measurements import LandmarkSet, band_centers, band_width
from .rotations import random_rotation

DEFAULT_COVERED = ("pelvis", "spine1", "spine2", "spine3", "left_collar", "right_collar", "left_shoulder", "right_shoulder", "left_hip", "right_hip")
DEFAULT_NOISE = 0.01
# joints posed at random by the synthesizer; the rest stay at identity so the
# torso faces the camera squarely
POSED_JOINTS = (
    "left_hip", "right_hip", "left_knee", "right_knee", "left_ankle", "right_ankle", "neck",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
)
MAX_POSE_ANGLE = 0.6
GARMENTS = {
    "short_sleeve_top": ("shoulder", "chest", "waist"),
    "skirt": ("waist", "hips"),
}


@dataclass(frozen=True, eq=False)
class GroundTruth:
    pose: Optional[Pose] = None
    beta: Optional[np.ndarray] = None
    translation: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class Scenario:
    camera: PerspectiveCamera
    tree: KinematicTree
    image_joints: np.ndarray
    visible: np.ndarray
    twists: np.ndarray
    depth_offsets: np.ndarray
    cloth_mask: np.ndarray
    landmarks: tuple = ()
    scene_depth: Optional[float] = None
    measurement_noise: float = DEFAULT_NOISE
    model_params: dict = field(default_factory=dict)
    ground_truth: GroundTruth = field(default_factory=GroundTruth)

    def __post_init__(self):
        n = self.tree.joint_count
        checks = [
            ("image joints", np.shape(self.image_joints), (n, 2)),
            ("visibility", np.shape(self.visible), (n,)),
            ("twists", np.shape(self.twists), (n - 1,)),
            ("depth offsets", np.shape(self.depth_offsets), (n,)),
            ("cloth mask", np.shape(self.cloth_mask), (n,)),
        ]
        for what, got, want in checks:
            if got != want:
                raise InputError(f"scenario {what} have shape {got}, expected {want}")
        gt = self.ground_truth
        if gt.pose is not None and gt.pose.joint_count != n:
            raise InputError("ground-truth pose joint count differs from the skeleton")
        if self.scene_depth is not None and not self.scene_depth > 0:
            raise InputError("scene_depth must be positive")

    def build_model(self) -> BodyModel:
        return synth_body_model(len(self.tree.names), **self.model_params)


# ------------------------------------------------------------------ loading


def _member(doc: dict, key: str, base: Path, required: bool = True):
    val = doc.get(key)
    if val is None:
        if required:
            raise InputError(f"scenario is missing {key!r}")
        return None
    if isinstance(val, str):
        path = base / val
        if not path.exists():
            raise InputError(f"scenario member {key!r} refers to missing file {path}")
        return load_json(path)
    return val


def load_scenario(path) -> Scenario:
    path = Path(path)
    doc = load_json(path)
    base = path.parent
    try:
        camera = PerspectiveCamera.from_json(_member(doc, "camera", base))
        tree = tree_from_json(_member(doc, "skeleton", base))
        n = tree.joint_count
        px, vis = keypoints_from_json(_member(doc, "image_joints", base), n)
        tw = _member(doc, "twists", base)
        twists = np.asarray(tw["phi"] if isinstance(tw, dict) else tw, dtype=float)
        offsets = doc.get("depth_offsets")
        offsets = np.zeros(n) if offsets is None else np.asarray(offsets, dtype=float)
        lms = []
        for item in doc.get("landmarks") or []:
            lms.append(LandmarkSet.from_json(load_json(base / item) if isinstance(item, str) else item))
        covered = doc.get("cloth_mask", list(DEFAULT_COVERED))
        mask = cloth_mask(tree, covered)
        gt_doc = doc.get("ground_truth") or {}
        gt = GroundTruth()
        if gt_doc:
            pose = _member(gt_doc, "pose", base, False)
            beta = _member(gt_doc, "beta", base, False)
            trans = _member(gt_doc, "translation", base, False)
            gt = GroundTruth(
                pose_from_json(pose) if pose is not None else None,
                np.asarray(beta["beta"] if isinstance(beta, dict) else beta, dtype=float) if beta is not None else None,
                np.asarray(trans["translation"] if isinstance(trans, dict) else trans, dtype=float) if trans is not None else None,
            )
        depth = doc.get("scene_depth")
        return Scenario(
            camera=camera,
            tree=tree,
            image_joints=px,
            visible=vis,
            twists=twists,
            depth_offsets=offsets,
            cloth_mask=mask,
            landmarks=tuple(lms),
            scene_depth=None if depth is None else float(depth),
            measurement_noise=float(doc.get("measurement_noise", DEFAULT_NOISE)),
            model_params=dict(doc.get("model") or {}),
            ground_truth=gt,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: malformed scenario: {exc!r}") from None


# ------------------------------------------------------------------ synthesis


def synth_pose(tree: KinematicTree, rng: np.random.Generator, joints=POSED_JOINTS, max_angle: float = MAX_POSE_ANGLE) -> Pose:
    R = np.tile(np.eye(3), (tree.joint_count, 1, 1))
    for name in joints:
        R[tree.index(name)] = random_rotation(rng, max_angle)
    return Pose(R, np.zeros(3))


def synth_landmarks(model: BodyModel, beta, pose: Pose, translation, camera: PerspectiveCamera, joints_cam) -> list:
    """Garment landmarks at the torso band extremes and at the shoulder joints, in pixels."""
    rest = shape_mesh(model, beta).vertices
    posed = skin(model, beta, pose).vertices + translation
    torso = model.part_mask("torso")
    pts = {}
    for name, (cy, half) in band_centers(rest).items():
        _, left, right = band_width(rest, torso, cy, half)
        key = {"chest_width": "chest", "waist_width": "waist", "hips_width": "hip"}[name]
        pts[f"left_{key}_lm"] = posed[left]
        pts[f"right_{key}_lm"] = posed[right]
    tree = model.tree
    pts["left_shoulder_lm"] = joints_cam[tree.index("left_shoulder")]
    pts["right_shoulder_lm"] = joints_cam[tree.index("right_shoulder")]
    out = []
    for category, parts in GARMENTS.items():
        labels = [f"{side}_{'hip' if p == 'hips' else p}_lm" for p in parts for side in ("left", "right")]
        px = project(camera, np.array([pts[lbl] for lbl in labels]))
        out.append(LandmarkSet(category, {lbl: tuple(float(c) for c in uv) for lbl, uv in zip(labels, px)}))
    return out


def synth_scenario(seed: int, out_dir, pose_db_size: int = 64, camera: PerspectiveCamera | None = None, model_params=None) -> Path:
    """Write a complete ground-truth scenario and a pose database into ``out_dir``.

    Returns the path of ``scenario.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = {"shape_dims": 10, "vertex_budget": 890, "seed": 0, **(model_params or {})}
    model = synth_body_model(24, **params)
    camera = camera or PerspectiveCamera.centered()
    tree = model.tree

    rng = np.random.default_rng(derive_seed(seed, "beta"))
    beta = np.zeros(model.shape_dims)
    k = min(8, model.shape_dims)
    beta[:k] = rng.uniform(-1.5, 1.5, size=k)
    pose = synth_pose(tree, np.random.default_rng(derive_seed(seed, "pose")))
    rng = np.random.default_rng(derive_seed(seed, "placement"))
    root_cam = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2), rng.uniform(2.5, 4.0)])

    joints_model = posed_joints(model, beta, pose)
    translation = root_cam - joints_model[tree.root]
    joints_cam = joints_model + translation
    pixels = project(camera, joints_cam)
    shaped = tree_from_joints(tree, regress_joints(model, shape_mesh(model, beta)))
    twists = extract_twists(shaped, pose)
    landmarks = synth_landmarks(model, beta, pose, translation, camera, joints_cam)

    dump_json(tree_to_json(tree), out / "skeleton.json")
    dump_json(keypoints_to_json(pixels), out / "keypoints.json")
    dump_json({"phi": twists.tolist()}, out / "twists.json")
    lm_files = []
    for lm in landmarks:
        name = f"landmarks_{lm.category}.json"
        dump_json(lm.to_json(), out / name)
        lm_files.append(name)
    dump_json(pose_to_json(pose), out / "gt_pose.json")
    dump_json({"beta": beta.tolist()}, out / "gt_beta.json")
    dump_json({"translation": translation.tolist()}, out / "gt_translation.json")
    scenario = {
        "camera": camera.to_json(),
        "skeleton": "skeleton.json",
        "image_joints": "keypoints.json",
        "depth_offsets": (joints_cam[:, 2] - joints_cam[tree.root, 2]).tolist(),
        "scene_depth": float(joints_cam[tree.root, 2]),
        "twists": "twists.json",
        "landmarks": lm_files,
        "cloth_mask": list(DEFAULT_COVERED),
        "measurement_noise": 1e-7,
        "model": params,
        "ground_truth": {"pose": "gt_pose.json", "beta": "gt_beta.json", "translation": "gt_translation.json"},
    }
    dump_json(scenario, out / "scenario.json")

    rng = np.random.default_rng(derive_seed(seed, "pose-db"))
    db_poses = [synth_pose(tree, rng, tree.names[1:], 0.8) for _ in range(pose_db_size)]
    if db_poses:
        PoseDatabase.from_poses(db_poses, [f"synth_{i:04d}" for i in range(pose_db_size)]).save_jsonl(out / "pose_db.jsonl")
    return out / "scenario.json"
