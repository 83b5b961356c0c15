import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from dressform.errors import DegenerateError, InputError
from dressform.metrics import (
    CSV_COLUMNS,
    kpe_2d,
    keypoint_loss,
    make_report,
    mpjpe_c,
    pa_mpjpe_c,
    procrustes_align,
    report_to_csv,
    report_to_json,
    shape_errors,
    twist_loss,
    visibility_weights,
)
from dressform.rotations import random_rotation

ALL4 = np.ones(4, bool)


def test_mpjpe_zero_and_offset():
    x = np.random.default_rng(0).normal(size=(6, 3))
    assert mpjpe_c(x, x, np.ones(6, bool)) == 0.0
    assert mpjpe_c(x + [0.01, 0, 0], x, np.ones(6, bool)) == pytest.approx(10.0, abs=1e-9)


def test_mpjpe_mixed_errors_only_covered():
    gt = np.zeros((3, 3))
    pred = np.array([[0.003, 0, 0], [0, 0.005, 0], [9.0, 9.0, 9.0]])
    assert mpjpe_c(pred, gt, [True, True, False]) == pytest.approx(4.0, abs=1e-12)


def test_mpjpe_errors():
    with pytest.raises(InputError):
        mpjpe_c(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros(3, bool))
    with pytest.raises(InputError):
        mpjpe_c(np.zeros((3, 3)), np.zeros((4, 3)), np.ones(3, bool))


def test_procrustes_identity():
    x = np.random.default_rng(1).normal(size=(5, 3))
    T = procrustes_align(x, x, np.ones(5, bool))
    assert T.scale == pytest.approx(1.0)
    np.testing.assert_allclose(T.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(T.translation, 0, atol=1e-12)


def test_procrustes_recovers_similarity():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(8, 3))
    R = random_rotation(rng, 3.0)
    t = np.array([0.3, -1.0, 2.0])
    y = 2.0 * x @ R.T + t
    T = procrustes_align(x, y, np.ones(8, bool))
    assert T.scale == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(T.rotation, R, atol=1e-12)
    np.testing.assert_allclose(T.translation, t, atol=1e-12)
    assert pa_mpjpe_c(x, y, np.ones(8, bool)) < 1e-9


def _objective(params, x, y):
    R = Rotation.from_rotvec(params[:3]).as_matrix()
    return float(((np.exp(params[3]) * x @ R.T + params[4:] - y) ** 2).sum())


def _brute_force_procrustes(x, y):
    best = None
    for rv in Rotation.create_group("O").as_rotvec().tolist() + Rotation.random(40, random_state=0).as_rotvec().tolist():
        start = np.concatenate([rv, [0.0], y.mean(0) - x.mean(0)])
        res = minimize(_objective, start, args=(x, y), method="BFGS", options={"gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    return best


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_procrustes_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 3))
    y = rng.normal(size=(4, 3))
    T = procrustes_align(x, y, ALL4)
    ours = float(((T.apply(x) - y) ** 2).sum())
    best = _brute_force_procrustes(x, y)
    assert ours == pytest.approx(best.fun, abs=1e-6)
    assert ours <= best.fun + 1e-9
    assert np.linalg.det(T.rotation) == pytest.approx(1.0)


def test_procrustes_forbids_reflection():
    x = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    y = x * [-1, 1, 1]
    T = procrustes_align(x, y, ALL4)
    assert np.linalg.det(T.rotation) == pytest.approx(1.0)


def test_procrustes_degenerate():
    with pytest.raises(DegenerateError):
        procrustes_align(np.zeros((4, 3)), np.ones((4, 3)), ALL4)
    line = np.outer(np.arange(4.0), [1, 2, 3])
    with pytest.raises(DegenerateError):
        procrustes_align(line, line + 1, ALL4)
    with pytest.raises(DegenerateError):
        procrustes_align(np.eye(3)[:2], np.eye(3)[:2], np.ones(2, bool))


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_pa_mpjpe_invariance(seed, s):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(7, 3)), rng.normal(size=(7, 3))
    m = np.ones(7, bool)
    base = pa_mpjpe_c(x, y, m)
    R = random_rotation(rng, 3.0)
    moved = s * x @ R.T + rng.normal(size=3)
    assert pa_mpjpe_c(moved, y, m) == pytest.approx(base, rel=1e-6, abs=1e-9)
    assert base <= mpjpe_c(x, y, m) + 1e-9


def test_pa_removes_composed_similarity():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(6, 3))
    R1, R2 = random_rotation(rng, 2.0), random_rotation(rng, 2.0)
    y = 0.5 * (1.5 * x @ R1.T + 1) @ R2.T - 2
    assert pa_mpjpe_c(x, y, np.ones(6, bool)) < 1e-9


def test_kpe_2d():
    gt = np.zeros((2, 2))
    assert kpe_2d(np.array([[3.0, 4.0], [0, 0]]), gt, [True, False]) == pytest.approx(5.0)
    assert kpe_2d(np.array([[3.0, 4.0], [0, 0]]), gt, [True, True]) == pytest.approx(2.5)


def test_keypoint_loss():
    gt = np.zeros((2, 3))
    pred = np.array([[1.0, -2.0, 3.0], [1.0, 1.0, 1.0]])
    assert keypoint_loss(pred, gt, [1.0, 2.0]) == pytest.approx(12.0)
    assert keypoint_loss(pred, gt, [0.0, 0.0]) == 0.0
    with pytest.raises(InputError):
        keypoint_loss(pred, gt, [-1.0, 1.0])
    with pytest.raises(InputError):
        keypoint_loss(pred, gt, [1.0])


def test_twist_loss():
    assert twist_loss([0.0, math.pi / 2], [math.pi, math.pi / 2], [1.0, 1.0]) == pytest.approx(2.0)
    assert twist_loss([math.pi - 1e-9], [-math.pi + 1e-9], [1.0]) == pytest.approx(0.0, abs=1e-8)
    assert twist_loss([0.1], [0.1 + 2 * math.pi], [3.0]) == pytest.approx(0.0, abs=1e-12)


def test_visibility_weights():
    w = visibility_weights([True, False])
    assert w.tolist() == [1.0, 0.2]


def test_shape_errors(model):
    assert all(v == 0 for v in shape_errors(model, np.zeros(10), np.zeros(10)).values())
    a = np.zeros(10)
    b = np.zeros(10)
    b[0] = 1.0
    e = shape_errors(model, a, b)
    assert e["height"] == pytest.approx(30.0, abs=1e-6)
    assert e["chest_width"] == pytest.approx(0.0, abs=1e-9)
    assert shape_errors(model, b, a) == pytest.approx(e)


@given(st.integers(0, 2**32 - 1))
def test_joint_permutation_consistency(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    m = rng.random(8) < 0.7
    m[:3] = True
    p = rng.permutation(8)
    assert mpjpe_c(x[p], y[p], m[p]) == pytest.approx(mpjpe_c(x, y, m))
    assert pa_mpjpe_c(x[p], y[p], m[p]) == pytest.approx(pa_mpjpe_c(x, y, m))


def test_report_csv_and_json():
    shape = {"height": 1.0, "chest_width": 2.0, "waist_width": 3.0, "hips_width": 4.0}
    r = make_report(5.0, 4.0, 1.5, shape)
    assert r["shape_errors_mm"] == {"height": 1.0, "chest": 2.0, "waist": 3.0, "hips": 4.0}
    lines = report_to_csv(r).splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert [float(v) for v in lines[1].split(",")] == [5.0, 4.0, 1.5, 1.0, 2.0, 3.0, 4.0]
    assert json.loads(report_to_json(r)) == r
    bare = report_to_csv(make_report(5.0, 4.0, 1.5, None)).splitlines()[1]
    assert bare.endswith(",,,,")


def test_all_joint_variants_without_mask():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    assert mpjpe_c(x, y) == mpjpe_c(x, y, np.ones(5, bool))
    assert pa_mpjpe_c(x, y) == pa_mpjpe_c(x, y, np.ones(5, bool))
    assert kpe_2d(x[:, :2], y[:, :2]) == kpe_2d(x[:, :2], y[:, :2], np.ones(5, bool))
