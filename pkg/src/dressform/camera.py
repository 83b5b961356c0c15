"""Pinhole projection and bone-length-ratio depth placement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, InputError
from .kinematics import ROOT, KinematicTree

DEFAULT_ANCHOR_NAMES = ("spine1", "spine2", "spine3", "left_hip", "right_hip")


@dataclass(frozen=True)
class PerspectiveCamera:
    focal: float = 1000.0
    cx: float = 512.0
    cy: float = 512.0
    width: int = 1024
    height: int = 1024

    def __post_init__(self):
        vals = (self.focal, self.cx, self.cy, self.width, self.height)
        if not all(np.isfinite(v) for v in vals):
            raise InputError("camera parameters must be finite")
        if self.focal <= 0:
            raise InputError(f"focal length must be positive, got {self.focal}")
        if self.width <= 0 or self.height <= 0:
            raise InputError(f"image size must be positive, got {self.width}x{self.height}")

    @classmethod
    def centered(cls, focal: float = 1000.0, width: int = 1024, height: int = 1024) -> "PerspectiveCamera":
        return cls(float(focal), width / 2.0, height / 2.0, int(width), int(height))

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def image_size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def to_json(self) -> dict:
        return {"focal": self.focal, "cx": self.cx, "cy": self.cy, "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, doc: dict) -> "PerspectiveCamera":
        try:
            return cls(float(doc["focal"]), float(doc["cx"]), float(doc["cy"]), int(doc["width"]), int(doc["height"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed camera: {exc!r}") from None


def project(camera: PerspectiveCamera, points, translation=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Pixel coordinates of ``points + translation``; raises for points at or behind the camera."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3) + np.asarray(translation, dtype=float)
    z = pts[:, 2]
    bad = np.flatnonzero(~(z > 0.0))
    if bad.size:
        raise DegenerateError(f"points at or behind the camera plane: indices {bad.tolist()}")
    u = camera.focal * pts[:, 0] / z + camera.cx
    v = camera.focal * pts[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1)


def back_project(camera: PerspectiveCamera, pixels, depths) -> np.ndarray:
    """Camera-space points at the given depths along the rays through ``pixels``."""
    px = np.asarray(pixels, dtype=float).reshape(-1, 2)
    z = np.broadcast_to(np.asarray(depths, dtype=float), (px.shape[0],))
    x = (px[:, 0] - camera.cx) * z / camera.focal
    y = (px[:, 1] - camera.cy) * z / camera.focal
    return np.stack([x, y, z], axis=1)


def adaptive_depth(camera: PerspectiveCamera, bone_lengths_camera, bone_lengths_image) -> float:
    """Depth ``f * sum(camera lengths) / sum(image lengths)``."""
    bc = np.asarray(bone_lengths_camera, dtype=float).ravel()
    bi = np.asarray(bone_lengths_image, dtype=float).ravel()
    if bc.size == 0 or bc.shape != bi.shape:
        raise InputError(f"need equally many camera and image bone lengths, got {bc.size} and {bi.size}")
    s = float(bi.sum())
    if not s > 0.0:
        raise DegenerateError("image anchor bones have zero total length; depth is undefined")
    return camera.focal * float(bc.sum()) / s


def anchor_indices(tree: KinematicTree, names=DEFAULT_ANCHOR_NAMES) -> list[int]:
    """Resolve anchor bones (named by their child joint) to joint indices."""
    out = []
    for name in names:
        k = tree.index(name) if isinstance(name, str) else int(name)
        if not 0 <= k < tree.joint_count or tree.parents[k] == ROOT:
            raise InputError(f"anchor {name!r} is not a non-root joint")
        out.append(k)
    if not out:
        raise InputError("anchor bone set is empty")
    return out


def place_body(
    camera: PerspectiveCamera,
    model_joints_rest,
    image_joints,
    anchors,
    tree: KinematicTree,
    visible=None,
) -> np.ndarray:
    """Camera translation of the model so its root lands on its pixel at the adaptive depth.

    ``anchors`` are non-root joint indices; each names the bone from its
    parent. Anchors with an invisible endpoint are skipped. Returns the
    translation ``t`` such that camera-space points are ``model + t``.
    """
    J = np.asarray(model_joints_rest, dtype=float)
    px = np.asarray(image_joints, dtype=float)
    n = tree.joint_count
    if J.shape != (n, 3) or px.shape != (n, 2):
        raise InputError(f"expected ({n}, 3) model joints and ({n}, 2) pixels, got {J.shape} and {px.shape}")
    vis = np.ones(n, dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
    root = tree.root
    if not vis[root] or not np.all(np.isfinite(px[root])):
        raise InputError("root joint pixel is missing")
    used = [k for k in anchors if vis[k] and vis[tree.parents[k]]]
    if not used:
        raise DegenerateError("no anchor bone has both endpoints visible")
    b_cam = [np.linalg.norm(J[k] - J[tree.parents[k]]) for k in used]
    b_img = [np.linalg.norm(px[k] - px[tree.parents[k]]) for k in used]
    z = adaptive_depth(camera, b_cam, b_img)
    tx = (px[root, 0] - camera.cx) * z / camera.focal - J[root, 0]
    ty = (px[root, 1] - camera.cy) * z / camera.focal - J[root, 1]
    tz = z - J[root, 2]
    return np.array([tx, ty, tz])


def keypoints_to_json(points, visible=None) -> dict:
    points = np.asarray(points, dtype=float)
    vis = [True] * len(points) if visible is None else [bool(v) for v in visible]
    return {"points": points.tolist(), "visible": vis}


def keypoints_from_json(doc: dict, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    try:
        pts = np.asarray(doc["points"], dtype=float)
        vis = np.asarray(doc.get("visible", [True] * len(pts)), dtype=bool)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed keypoints: {exc!r}") from None
    if pts.ndim != 2 or pts.shape[1] != 2 or vis.shape != (pts.shape[0],):
        raise InputError(f"keypoints must be [[u, v]] with one visibility flag each, got {pts.shape}")
    if n is not None and pts.shape[0] != n:
        raise InputError(f"expected {n} keypoints, got {pts.shape[0]}")
    return pts, vis
