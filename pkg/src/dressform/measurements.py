"""Anthropometric measurements and Gaussian shape inference from them.

Measurements come in two groups. Axial ones are skeleton path lengths and
do not depend on pose. Radial ones are widths read from clothing landmark
pairs (or, for a mesh, from horizontal vertex bands). A linear-Gaussian
measurement model ``omega ~ A beta + b`` fitted on the parametric body is
inverted in closed form to get a posterior over shape coefficients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional

import numpy as np

from .body import BodyModel, regress_joints, shape_mesh
from .camera import PerspectiveCamera
from .errors import DegenerateError, InputError
from .kinematics import KinematicTree

AXIAL_NAMES = ("height", "leg_length", "arm_span", "torso_length")
RADIAL_NAMES = ("shoulder_width", "chest_width", "waist_width", "hips_width")
MEASUREMENT_NAMES = AXIAL_NAMES + RADIAL_NAMES

# band centres as fractions of height above the lowest vertex
BAND_FRACTIONS = {"chest_width": 0.72, "waist_width": 0.60, "hips_width": 0.52}
BAND_HALF_THICKNESS = 0.02

_SPINE = ("pelvis", "spine1", "spine2", "spine3", "neck", "head")
_LEG = ("hip", "knee", "ankle")
_ARM = ("hand", "wrist", "elbow", "shoulder", "collar")


@dataclass(frozen=True)
class MeasurementVector:
    """Named measurements in meters; ``None`` marks an unavailable entry."""

    values: Mapping[str, Optional[float]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for name in MEASUREMENT_NAMES:
            v = self.values.get(name)
            if v is not None:
                v = float(v)
                if not (np.isfinite(v) and v > 0.0):
                    raise InputError(f"measurement {name!r} must be positive and finite, got {v}")
            clean[name] = v
        unknown = set(self.values) - set(MEASUREMENT_NAMES)
        if unknown:
            raise InputError(f"unknown measurement names: {sorted(unknown)}")
        object.__setattr__(self, "values", clean)

    def __getitem__(self, name: str) -> Optional[float]:
        return self.values[name]

    @property
    def axial(self) -> dict:
        return {k: self.values[k] for k in AXIAL_NAMES}

    @property
    def radial(self) -> dict:
        return {k: self.values[k] for k in RADIAL_NAMES}

    def available(self) -> dict:
        return {k: v is not None for k, v in self.values.items()}

    def as_arrays(self, names=MEASUREMENT_NAMES) -> tuple[np.ndarray, np.ndarray]:
        vals = np.array([self.values[n] if self.values[n] is not None else np.nan for n in names])
        return vals, ~np.isnan(vals)

    def merged(self, other: "MeasurementVector") -> "MeasurementVector":
        """Entries of ``other`` fill or average with ours."""
        out = {}
        for n in MEASUREMENT_NAMES:
            a, b = self.values[n], other.values[n]
            out[n] = a if b is None else b if a is None else 0.5 * (a + b)
        return MeasurementVector(out)

    def edited(self, **changes: float) -> "MeasurementVector":
        for n in changes:
            if n not in MEASUREMENT_NAMES:
                raise InputError(f"unknown measurement name {n!r}")
        return MeasurementVector({**self.values, **changes})

    def to_json(self) -> dict:
        return {
            "axial": self.axial,
            "radial": self.radial,
            "available": self.available(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MeasurementVector":
        vals = {}
        for group in ("axial", "radial"):
            vals.update(doc.get(group, {}))
        return cls(vals)


# ------------------------------------------------------------------ skeleton


def _path_length(joints: np.ndarray, idx: list) -> float:
    pts = joints[idx]
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def _resolve(tree: KinematicTree, names) -> list:
    try:
        return [tree.index(n) for n in names]
    except (KeyError, ValueError, InputError):
        missing = [n for n in names if n not in tree.names]
        raise InputError(f"skeleton lacks joints required for measurements: {missing}") from None


def axial_measurements(tree: KinematicTree, joints) -> dict:
    """Pose-independent skeleton lengths.

    height is the standing height: the pelvis-to-head path plus the mean
    hip-to-ankle path, which equals the vertical extent of an upright
    skeleton. arm_span runs hand to hand through both collars and spine3.
    """
    joints = np.asarray(joints, dtype=float)
    if joints.shape != (tree.joint_count, 3):
        raise InputError(f"expected ({tree.joint_count}, 3) joints, got {joints.shape}")
    spine = _resolve(tree, _SPINE)
    legs = [_path_length(joints, _resolve(tree, [f"{s}_{j}" for j in _LEG])) for s in ("left", "right")]
    leg = 0.5 * (legs[0] + legs[1])
    left_arm = _resolve(tree, [f"left_{j}" for j in _ARM])
    right_arm = _resolve(tree, [f"right_{j}" for j in _ARM])
    arm_path = left_arm + [tree.index("spine3")] + right_arm[::-1]
    return {
        "height": _path_length(joints, spine) + leg,
        "leg_length": leg,
        "arm_span": _path_length(joints, arm_path),
        "torso_length": _path_length(joints, spine[:5]),
    }


# ------------------------------------------------------------------ landmarks


@dataclass(frozen=True)
class LandmarkSet:
    category: str
    points: Mapping[str, tuple]

    def __post_init__(self):
        if not isinstance(self.points, Mapping):
            raise InputError("landmark points must be a label -> coordinates mapping")
        dims = {len(p) for p in self.points.values()}
        if not dims <= {2, 3} or len(dims) > 1:
            raise InputError("landmarks must all be 2D pixels or all 3D points")
        pts = {k: tuple(float(c) for c in v) for k, v in self.points.items()}
        object.__setattr__(self, "points", pts)

    @property
    def is_3d(self) -> bool:
        return any(len(p) == 3 for p in self.points.values())

    def to_json(self) -> dict:
        return {"category": self.category, "points": {k: list(v) for k, v in self.points.items()}}

    @classmethod
    def from_json(cls, doc: dict) -> "LandmarkSet":
        try:
            pts = doc["points"]
            # points may be an object or a list of [label, coords] pairs
            pairs = list(pts.items()) if isinstance(pts, dict) else [(str(a), tuple(b)) for a, b in pts]
            labels = [a for a, _ in pairs]
            if len(set(labels)) != len(labels):
                raise InputError("duplicate landmark labels")
            return cls(str(doc["category"]), dict(pairs))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed landmark set: {exc!r}") from None


@dataclass(frozen=True)
class LandmarkMap:
    """Per clothing category: measurement name -> (left label, right label)."""

    categories: Mapping[str, Mapping[str, tuple]]
    scale_rule: str = "pixel_distance * depth / focal"

    def __post_init__(self):
        for cat, pairs in self.categories.items():
            for name, pair in pairs.items():
                if name not in RADIAL_NAMES:
                    raise InputError(f"{cat}: {name!r} is not a radial measurement")
                if len(pair) != 2 or pair[0] == pair[1]:
                    raise InputError(f"{cat}: {name!r} needs two distinct landmark labels")

    @classmethod
    def from_json(cls, doc: dict) -> "LandmarkMap":
        try:
            cats = {c: {m: tuple(p) for m, p in pairs.items()} for c, pairs in doc["categories"].items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise InputError(f"malformed landmark map: {exc!r}") from None
        return cls(cats, doc.get("scale_rule", cls.scale_rule))


def default_landmark_map() -> LandmarkMap:
    text = resources.files("dressform").joinpath("data/landmark_map.json").read_text()
    return LandmarkMap.from_json(json.loads(text))


def radial_measurements(landmarks: LandmarkSet, mapping: LandmarkMap, depth: float, camera: PerspectiveCamera) -> dict:
    """Widths from landmark pairs; pixel pairs are scaled by ``depth / focal``."""
    if landmarks.category not in mapping.categories:
        raise InputError(f"unknown clothing category {landmarks.category!r}")
    out = {name: None for name in RADIAL_NAMES}
    scale = 1.0
    if not landmarks.is_3d:
        if not depth > 0:
            raise InputError(f"back-projection depth must be positive, got {depth}")
        scale = depth / camera.focal
    for name, (a, b) in mapping.categories[landmarks.category].items():
        if a in landmarks.points and b in landmarks.points:
            d = np.subtract(landmarks.points[a], landmarks.points[b])
            out[name] = float(np.sqrt(d @ d)) * scale
    return out


def measurements_from_observations(tree, joints, landmark_sets, mapping, depth, camera) -> MeasurementVector:
    """Axial entries from 3D joints plus radial entries from each landmark set (duplicates averaged)."""
    vec = MeasurementVector(axial_measurements(tree, joints))
    for lm in landmark_sets:
        vec = vec.merged(MeasurementVector(radial_measurements(lm, mapping, depth, camera)))
    return vec


# ------------------------------------------------------------------ mesh


def band_width(vertices: np.ndarray, mask: np.ndarray, center_y: float, half: float) -> tuple[float, int, int]:
    """Lateral extent of masked vertices with ``|y - center_y| <= half``.

    Returns the width and the indices of the rightmost and leftmost vertices.
    """
    sel = np.flatnonzero(mask & (np.abs(vertices[:, 1] - center_y) <= half))
    if sel.size == 0:
        raise DegenerateError(f"no vertices in the band at y={center_y:.4f}")
    x = vertices[sel, 0]
    hi, lo = sel[np.argmax(x)], sel[np.argmin(x)]
    return float(vertices[hi, 0] - vertices[lo, 0]), int(hi), int(lo)


def band_centers(vertices: np.ndarray) -> dict:
    y0, y1 = float(vertices[:, 1].min()), float(vertices[:, 1].max())
    h = y1 - y0
    return {name: (y0 + f * h, BAND_HALF_THICKNESS * h) for name, f in BAND_FRACTIONS.items()}


def mesh_measurements(model: BodyModel, beta) -> MeasurementVector:
    """All eight measurements of the rest-shape mesh at ``beta``.

    height is the vertical mesh extent, widths come from torso vertex bands,
    and the remaining entries from the regressed skeleton.
    """
    mesh = shape_mesh(model, beta)
    v = mesh.vertices
    joints = regress_joints(model, mesh)
    vals = axial_measurements(model.tree, joints)
    vals["height"] = float(v[:, 1].max() - v[:, 1].min())
    ls, rs = model.tree.index("left_shoulder"), model.tree.index("right_shoulder")
    vals["shoulder_width"] = float(np.linalg.norm(joints[ls] - joints[rs]))
    torso = model.part_mask("torso")
    for name, (cy, half) in band_centers(v).items():
        vals[name] = band_width(v, torso, cy, half)[0]
    return MeasurementVector(vals)


# ------------------------------------------------------------------ inference


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Affine map ``omega = A beta + b`` with residual covariance, rows in ``names`` order."""

    A: np.ndarray
    b: np.ndarray
    residual_cov: np.ndarray
    names: tuple = MEASUREMENT_NAMES

    @property
    def shape_dims(self) -> int:
        return self.A.shape[1]

    def predict(self, beta) -> np.ndarray:
        return self.A @ np.asarray(beta, dtype=float) + self.b

    def null_directions(self, tol: float = 1e-9) -> np.ndarray:
        """Orthonormal basis (rows) of shape directions the measurements cannot see."""
        _, s, vt = np.linalg.svd(self.A)
        rank = int((s > tol * max(s.max(), 1.0)).sum())
        return vt[rank:]


def build_measurement_model(model: BodyModel, sample_count: int = 400, seed: int = 0) -> MeasurementModel:
    """Least-squares fit of measurements against uniform random shapes.

    Shapes are drawn uniformly in ``[-beta_limit, beta_limit]^m``.
    """
    m = model.shape_dims
    if sample_count < 10 * m:
        raise InputError(f"sample_count must be at least {10 * m} for {m} shape dims, got {sample_count}")
    rng = np.random.default_rng(seed)
    betas = rng.uniform(-model.beta_limit, model.beta_limit, size=(sample_count, m))
    omega = np.array([mesh_measurements(model, b).as_arrays()[0] for b in betas])
    X = np.hstack([betas, np.ones((sample_count, 1))])
    coef, _, rank, sv = np.linalg.lstsq(X, omega, rcond=None)
    if rank < m + 1:
        _, _, vt = np.linalg.svd(X)
        raise DegenerateError(f"shape sample design is rank deficient; null directions {vt[rank:].tolist()}")
    resid = omega - X @ coef
    dof = max(sample_count - m - 1, 1)
    cov = resid.T @ resid / dof
    return MeasurementModel(coef[:m].T.copy(), coef[m].copy(), 0.5 * (cov + cov.T))


@dataclass(frozen=True, eq=False)
class ShapePosterior:
    mean: np.ndarray
    covariance: np.ndarray

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}


def _check_psd(S: np.ndarray, what: str) -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.all(np.isfinite(S)):
        raise InputError(f"{what} must be a finite square matrix")
    if np.abs(S - S.T).max() > 1e-9 * max(1.0, np.abs(S).max()):
        raise InputError(f"{what} is not symmetric")
    if np.linalg.eigvalsh(S).min() < -1e-9 * max(1.0, np.abs(S).max()):
        raise InputError(f"{what} is not positive semi-definite")


def fit_shape(mmodel: MeasurementModel, observed: MeasurementVector, prior_mean, prior_cov, noise: float = 0.005) -> ShapePosterior:
    """Condition a Gaussian shape prior on the available measurements.

    Each observed entry has variance ``residual variance + noise**2``.
    """
    mu = np.asarray(prior_mean, dtype=float)
    S = np.asarray(prior_cov, dtype=float)
    m = mmodel.shape_dims
    if mu.shape != (m,) or S.shape != (m, m):
        raise InputError(f"prior must be ({m},) mean and ({m}, {m}) covariance")
    _check_psd(S, "prior covariance")
    if noise < 0:
        raise InputError("measurement noise must be nonnegative")
    vals, mask = observed.as_arrays(mmodel.names)
    if not mask.any():
        return ShapePosterior(mu.copy(), S.copy())
    A = mmodel.A[mask]
    R = mmodel.residual_cov[np.ix_(mask, mask)] + noise**2 * np.eye(int(mask.sum()))
    AS = A @ S
    innov = A @ AS.T + R
    try:
        K = np.linalg.solve(innov, AS).T
    except np.linalg.LinAlgError:
        raise DegenerateError("measurement covariance is singular; use a positive noise level") from None
    mean = mu + K @ (vals[mask] - (A @ mu + mmodel.b[mask]))
    # Joseph form keeps the result symmetric positive semi-definite
    IKA = np.eye(m) - K @ A
    cov = IKA @ S @ IKA.T + K @ R @ K.T
    return ShapePosterior(mean, 0.5 * (cov + cov.T))


def _condition(mean, C, fixed, values):
    """Mean and covariance after pinning coordinates ``fixed`` to ``values`` exactly."""
    free = np.setdiff1d(np.arange(len(mean)), fixed)
    x = mean.copy()
    cov = np.zeros_like(C)
    if len(fixed) == 0:
        return x, C.copy(), np.zeros(0)
    Cff = C[np.ix_(fixed, fixed)]
    g = np.linalg.lstsq(Cff, values - mean[fixed], rcond=None)[0]
    x[fixed] = values
    x[free] = mean[free] + C[np.ix_(free, fixed)] @ g
    cov[np.ix_(free, free)] = C[np.ix_(free, free)] - C[np.ix_(free, fixed)] @ np.linalg.lstsq(Cff, C[np.ix_(fixed, free)], rcond=None)[0]
    return x, 0.5 * (cov + cov.T), g


def bound_posterior(posterior: ShapePosterior, limit: float) -> ShapePosterior:
    """Most probable shape inside ``[-limit, limit]^m`` under the posterior.

    Coordinates that end up on a bound are held there and the covariance is
    conditioned on them. Interior means are returned unchanged.
    """
    mean, C = posterior.mean, posterior.covariance
    if np.all(np.abs(mean) <= limit):
        return posterior
    n = len(mean)
    x = np.clip(mean, -limit, limit)
    active = [i for i in range(n) if abs(x[i]) == limit]
    for _ in range(20 * n + 20):
        fixed = np.array(sorted(active), dtype=int)
        target, _, g = _condition(mean, C, fixed, x[fixed])
        p = target - x
        if np.abs(p).max() <= 1e-13 * (1.0 + np.abs(x).max()):
            # multipliers: positive when the bound is holding the optimum back
            lam = -g * np.sign(x[fixed])
            if len(fixed) == 0 or lam.min() >= -1e-9 * max(1.0, np.abs(lam).max()):
                x, cov, _ = _condition(mean, C, fixed, x[fixed])
                return ShapePosterior(x, cov)
            active.remove(int(fixed[np.argmin(lam)]))
            continue
        step, block = 1.0, None
        for i in range(n):
            if i in active or p[i] == 0:
                continue
            room = ((limit if p[i] > 0 else -limit) - x[i]) / p[i]
            if room < step:
                step, block = room, i
        x = x + step * p
        if block is not None:
            x[block] = limit if p[block] > 0 else -limit
            active.append(block)
    raise DegenerateError("bounded shape fit did not converge")


def sample_shape(posterior: ShapePosterior, seed: int, temperature: float = 1.0) -> np.ndarray:
    """``mean + temperature * L z`` with ``L L^T = covariance`` and standard normal ``z``."""
    if temperature < 0:
        raise InputError("temperature must be nonnegative")
    if temperature == 0:
        return posterior.mean.copy()
    C = posterior.covariance
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(C)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    z = np.random.default_rng(seed).standard_normal(len(posterior.mean))
    return posterior.mean + temperature * (L @ z)
