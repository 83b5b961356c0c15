import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dressform.errors import InputError
from dressform.rotations import (
    axis_angle_to_matrix,
    geodesic_distance,
    is_rotation,
    matrix_to_axis_angle,
    matrix_to_quaternion,
    quaternion_to_matrix,
    random_rotation,
    rodrigues,
    rotation_angle,
)

from helpers import axis_angle_matrix

unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)
angles = st.floats(-math.pi, math.pi)


@given(unit, angles)
def test_rodrigues_matches_quaternion_oracle(axis, angle):
    axis = np.asarray(axis) / np.linalg.norm(axis)
    R = rodrigues(axis, math.sin(angle), math.cos(angle))
    np.testing.assert_allclose(R, axis_angle_matrix(axis, angle), atol=1e-12)


def test_rodrigues_rejects_bad_inputs():
    with pytest.raises(InputError):
        rodrigues([1.0, 1.0, 0.0], 0.0, 1.0)
    with pytest.raises(InputError):
        rodrigues([1.0, 0.0, 0.0], 0.5, 0.5)


@given(unit, st.floats(0, math.pi - 1e-6))
def test_axis_angle_roundtrip(axis, angle):
    v = np.asarray(axis) / np.linalg.norm(axis) * angle
    R = axis_angle_to_matrix(v)
    np.testing.assert_allclose(axis_angle_to_matrix(matrix_to_axis_angle(R)), R, atol=1e-9)
    assert rotation_angle(R) == pytest.approx(angle, abs=1e-9)


def test_half_turn_axis_angle():
    R = axis_angle_to_matrix([0.0, math.pi, 0.0])
    np.testing.assert_allclose(axis_angle_to_matrix(matrix_to_axis_angle(R)), R, atol=1e-12)


def test_quaternion_roundtrip(rng):
    for _ in range(200):
        R = random_rotation(rng)
        np.testing.assert_allclose(quaternion_to_matrix(matrix_to_quaternion(R)), R, atol=1e-12)


def test_geodesic_distance_known_value():
    A = axis_angle_to_matrix([0.3, 0.0, 0.0])
    B = axis_angle_to_matrix([1.0, 0.0, 0.0])
    assert geodesic_distance(A, B) == pytest.approx(0.7, abs=1e-12)


def test_random_rotation_respects_bound(rng):
    for _ in range(500):
        R = random_rotation(rng, 0.25)
        assert is_rotation(R)
        assert rotation_angle(R) < 0.25


def test_is_rotation_rejects_reflection():
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert is_rotation(np.eye(3))
