import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dressform.body import regress_joints, shape_mesh
from dressform.camera import (
    DEFAULT_ANCHOR_NAMES,
    PerspectiveCamera,
    adaptive_depth,
    anchor_indices,
    back_project,
    keypoints_from_json,
    keypoints_to_json,
    place_body,
    project,
)
from dressform.errors import DegenerateError, InputError
from dressform.kinematics import DEFAULT_REST_JOINTS, tree_from_joints

CAM = PerspectiveCamera.centered()


def test_camera_validation():
    with pytest.raises(InputError):
        PerspectiveCamera(focal=0.0)
    with pytest.raises(InputError):
        PerspectiveCamera(width=0)
    assert CAM.principal_point == (512.0, 512.0)
    assert PerspectiveCamera.from_json(CAM.to_json()) == CAM
    with pytest.raises(InputError):
        PerspectiveCamera.from_json({"focal": 1})


def test_optical_axis_point():
    np.testing.assert_array_equal(project(CAM, [[0, 0, 0]], [0, 0, 2]), [[CAM.cx, CAM.cy]])


def test_doubling_depth_halves_extent():
    rig = np.array([[-0.5, -0.5, 0], [0.5, -0.5, 0], [0.5, 0.5, 0], [-0.5, 0.5, 0]])
    a = project(CAM, rig, [0, 0, 2]) - [CAM.cx, CAM.cy]
    b = project(CAM, rig, [0, 0, 4]) - [CAM.cx, CAM.cy]
    np.testing.assert_allclose(b, a / 2, atol=1e-12)


def test_projection_matches_hand_arithmetic(rng):
    cam = PerspectiveCamera(850.0, 300.0, 260.0, 640, 480)
    pts = rng.normal(size=(50, 3))
    t = np.array([0.1, -0.2, 6.0])
    got = project(cam, pts, t)
    for p, uv in zip(pts, got):
        x, y, z = p + t
        assert abs(uv[0] - (850.0 * x / z + 300.0)) < 1e-9
        assert abs(uv[1] - (850.0 * y / z + 260.0)) < 1e-9


def test_behind_camera_lists_indices():
    with pytest.raises(DegenerateError, match=r"\[1, 2\]"):
        project(CAM, [[0, 0, 1], [0, 0, -1], [0, 0, 0]])


def test_back_project_inverts_project(rng):
    pts = rng.normal(size=(20, 3)) + [0, 0, 5]
    np.testing.assert_allclose(back_project(CAM, project(CAM, pts), pts[:, 2]), pts, atol=1e-12)


def test_adaptive_depth_arithmetic():
    assert adaptive_depth(CAM, [0.5, 0.7], [150.0, 250.0]) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(DegenerateError):
        adaptive_depth(CAM, [1.0], [0.0])
    with pytest.raises(InputError):
        adaptive_depth(CAM, [], [])
    with pytest.raises(InputError):
        adaptive_depth(CAM, [1.0, 2.0], [1.0])


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_adaptive_depth_homogeneous(s_cam, s_img):
    bc, bi = np.array([0.2, 0.4, 0.3]), np.array([40.0, 90.0, 55.0])
    z = adaptive_depth(CAM, bc, bi)
    assert adaptive_depth(CAM, bc * s_cam, bi) == pytest.approx(z * s_cam, rel=1e-12)
    assert adaptive_depth(CAM, bc, bi * s_img) == pytest.approx(z / s_img, rel=1e-12)


def _fronto_scene(tree, depth, shift):
    # rest skeleton is planar in z = 0 for the torso; put the root at (shift, depth)
    t = np.array([shift[0], shift[1], depth])
    return DEFAULT_REST_JOINTS, t, project(CAM, DEFAULT_REST_JOINTS, t)


def test_depth_roundtrip_fronto_parallel(tree):
    J, t, px = _fronto_scene(tree, 2.5, (0.1, -0.05))
    anchors = anchor_indices(tree)
    b_cam = [np.linalg.norm(J[k] - J[tree.parents[k]]) for k in anchors]
    b_img = [np.linalg.norm(px[k] - px[tree.parents[k]]) for k in anchors]
    assert adaptive_depth(CAM, b_cam, b_img) == pytest.approx(2.5, abs=1e-6)


def test_place_body_recovers_translation(tree):
    J, t, px = _fronto_scene(tree, 3.3, (-0.2, 0.15))
    got = place_body(CAM, J, px, anchor_indices(tree), tree)
    np.testing.assert_allclose(got, t, atol=1e-6)
    np.testing.assert_allclose(project(CAM, J[:1], got), px[:1], atol=1e-9)


def test_root_at_principal_point_gives_zero_lateral_translation(tree):
    J, t, px = _fronto_scene(tree, 3.0, (0.0, 0.0))
    got = place_body(CAM, J, px, anchor_indices(tree), tree)
    assert got[0] == 0.0 and got[1] == 0.0


def test_anchor_growth_scales_depth(model, tree):
    J, t, px = _fronto_scene(tree, 3.0, (0.1, 0.1))
    anchors = anchor_indices(tree)
    z0 = place_body(CAM, J, px, anchors, tree)[2] + J[0, 2]
    z1 = place_body(CAM, J * 1.1, px, anchors, tree)[2] + 1.1 * J[0, 2]
    assert z1 == pytest.approx(1.1 * z0, rel=1e-14)


def test_anchor_growth_from_shape(model):
    # growing the height component lengthens every spine anchor; the hips do not move
    beta = np.zeros(10)
    J0 = regress_joints(model, shape_mesh(model, beta))
    tree = tree_from_joints(model.tree, J0)
    px = project(CAM, J0, [0, 0, 3.0])
    anchors = anchor_indices(tree, ("spine1", "spine2", "spine3"))
    beta[0] = 2.0
    J1 = regress_joints(model, shape_mesh(model, beta))
    ratio = np.linalg.norm(J1[3] - J1[0]) / np.linalg.norm(J0[3] - J0[0])
    z0 = place_body(CAM, J0, px, anchors, tree)[2]
    z1 = place_body(CAM, J1, px, anchors, tree)[2]
    assert z1 == pytest.approx(ratio * z0, rel=1e-12)


def test_projection_preserves_anchor_sum(tree, rng):
    for _ in range(20):
        depth = rng.uniform(2, 6)
        J, t, px = _fronto_scene(tree, depth, rng.uniform(-0.3, 0.3, 2))
        anchors = anchor_indices(tree)
        got = place_body(CAM, J, px, anchors, tree)
        re = project(CAM, J, got)
        s_in = sum(np.linalg.norm(px[k] - px[tree.parents[k]]) for k in anchors)
        s_out = sum(np.linalg.norm(re[k] - re[tree.parents[k]]) for k in anchors)
        assert abs(s_in - s_out) < 1e-6


def test_place_body_errors(tree):
    J, t, px = _fronto_scene(tree, 3.0, (0, 0))
    vis = np.ones(24, dtype=bool)
    vis[0] = False
    with pytest.raises(InputError, match="root"):
        place_body(CAM, J, px, anchor_indices(tree), tree, vis)
    with pytest.raises(InputError):
        anchor_indices(tree, ("pelvis",))
    with pytest.raises(InputError):
        anchor_indices(tree, ())
    flat = np.tile(px[:1], (24, 1))
    with pytest.raises(DegenerateError):
        place_body(CAM, J, flat, anchor_indices(tree), tree)


def test_invisible_anchor_endpoints_skipped(tree):
    J, t, px = _fronto_scene(tree, 3.0, (0.05, 0))
    vis = np.ones(24, dtype=bool)
    vis[tree.index("left_hip")] = False
    bad = px.copy()
    bad[tree.index("left_hip")] = [0.0, 0.0]
    np.testing.assert_allclose(place_body(CAM, J, bad, anchor_indices(tree), tree, vis), t, atol=1e-6)


def test_default_anchor_names(tree):
    assert [tree.names[k] for k in anchor_indices(tree)] == list(DEFAULT_ANCHOR_NAMES)


def test_keypoint_json_roundtrip():
    pts = np.array([[1.0, 2.0], [3.0, 4.0]])
    p, v = keypoints_from_json(keypoints_to_json(pts, [True, False]), 2)
    np.testing.assert_array_equal(p, pts)
    assert v.tolist() == [True, False]
    with pytest.raises(InputError):
        keypoints_from_json({"points": [[1, 2, 3]]})
    with pytest.raises(InputError):
        keypoints_from_json({"points": [[1, 2]]}, 3)
