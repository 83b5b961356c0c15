"""Evaluation metrics and keypoint/twist losses.

Joint errors are computed over clothing-covered joints and reported in
millimeters; 2D errors in pixels.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, InputError
from .kinematics import check_mask

COVERED_WEIGHT = 1.0
UNCOVERED_WEIGHT = 0.2
REPORT_SHAPE_KEYS = {"height": "height", "chest": "chest_width", "waist": "waist_width", "hips": "hips_width"}
CSV_COLUMNS = ("mpjpe_c_mm", "pa_mpjpe_c_mm", "kpe2d_px", "height_mm", "chest_mm", "waist_mm", "hips_mm")


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def _pair(pred, gt, dim: int):
    a = np.asarray(pred, dtype=float)
    b = np.asarray(gt, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != dim:
        raise InputError(f"prediction and ground truth must both be (n, {dim}), got {a.shape} and {b.shape}")
    return a, b


def _covered(mask, n: int) -> np.ndarray:
    # no mask means every joint (plain MPJPE / PA-MPJPE)
    mask = np.ones(n, dtype=bool) if mask is None else check_mask(mask, n)
    if not mask.any():
        raise InputError("cloth mask covers no joints")
    return mask


def mpjpe_c(pred, gt, mask=None) -> float:
    """Mean covered-joint position error in millimeters (inputs in meters)."""
    a, b = _pair(pred, gt, 3)
    m = _covered(mask, len(a))
    return float(np.linalg.norm(a[m] - b[m], axis=1).mean() * 1000.0)


def procrustes_align(source, target, mask=None) -> SimilarityTransform:
    """Least-squares similarity mapping covered ``source`` points onto ``target``, no reflections."""
    a, b = _pair(source, target, 3)
    m = _covered(mask, len(a))
    X, Y = a[m], b[m]
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    var_x = float((Xc**2).sum())
    if len(X) < 3 or var_x < 1e-24:
        raise DegenerateError("alignment needs at least three distinct covered points")
    U, S, Vt = np.linalg.svd(Yc.T @ Xc)
    if S[1] < 1e-12 * max(S[0], 1e-300):
        raise DegenerateError("covered points are collinear; rotation is undetermined")
    d = np.ones(3)
    d[2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = (U * d) @ Vt
    s = float((S * d).sum() / var_x)
    if not s > 0:
        raise DegenerateError("alignment produced a nonpositive scale")
    return SimilarityTransform(s, R, my - s * R @ mx)


def pa_mpjpe_c(pred, gt, mask=None) -> float:
    """:func:`mpjpe_c` after similarity-aligning the prediction to the ground truth."""
    T = procrustes_align(pred, gt, mask)
    return mpjpe_c(T.apply(pred), gt, mask)


def kpe_2d(pred2d, gt2d, mask=None) -> float:
    """Mean covered-joint pixel distance."""
    a, b = _pair(pred2d, gt2d, 2)
    m = _covered(mask, len(a))
    return float(np.linalg.norm(a[m] - b[m], axis=1).mean())


def _weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise InputError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError("weights must be nonnegative and finite")
    return w


def visibility_weights(mask, covered: float = COVERED_WEIGHT, uncovered: float = UNCOVERED_WEIGHT) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    return np.where(mask, covered, uncovered)


def keypoint_loss(pred, gt, weights) -> float:
    """Weighted L1 distance ``sum_k w_k * |x_k - gt_k|_1``."""
    a = np.asarray(pred, dtype=float)
    b = np.asarray(gt, dtype=float)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    w = _weights(weights, a.shape[0])
    return float(w @ np.abs(a - b).reshape(len(a), -1).sum(axis=1))


def twist_loss(pred_phi, gt_phi, weights) -> float:
    """Weighted distance between angles embedded as ``(cos, sin)``."""
    a = np.asarray(pred_phi, dtype=float).ravel()
    b = np.asarray(gt_phi, dtype=float).ravel()
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    w = _weights(weights, a.size)
    d = np.hypot(np.cos(a) - np.cos(b), np.sin(a) - np.sin(b))
    return float(w @ d)


def shape_errors(model, pred_beta, gt_beta) -> dict:
    """Absolute measurement differences in millimeters, keyed by measurement name."""
    from .measurements import mesh_measurements

    p = mesh_measurements(model, pred_beta).values
    g = mesh_measurements(model, gt_beta).values
    return {k: abs(p[k] - g[k]) * 1000.0 for k in p}


# ------------------------------------------------------------------ reports


def make_report(mpjpe_mm: float, pa_mm: float, kpe_px: float, shape_mm: dict | None) -> dict:
    report = {"mpjpe_c_mm": mpjpe_mm, "pa_mpjpe_c_mm": pa_mm, "kpe2d_px": kpe_px}
    if shape_mm is not None:
        report["shape_errors_mm"] = {short: shape_mm[full] for short, full in REPORT_SHAPE_KEYS.items()}
    return report


def report_to_csv(report: dict) -> str:
    shape = report.get("shape_errors_mm") or {}
    row = [report["mpjpe_c_mm"], report["pa_mpjpe_c_mm"], report["kpe2d_px"]]
    row += [shape.get(k, "") for k in ("height", "chest", "waist", "hips")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerow([repr(float(v)) if v != "" else "" for v in row])
    return buf.getvalue()


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
