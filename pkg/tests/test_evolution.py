import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dressform.errors import InputError
from dressform.evolution import (
    MutationConfig,
    PoseDatabase,
    crossover,
    derive_seed,
    generate_variants,
    knn_match,
    mutate,
    pose_distance,
)
from dressform.kinematics import Pose, cloth_mask
from dressform.rotations import is_rotation, random_rotation
from helpers import axis_angle_matrix, random_pose

N = 24
MASK = np.zeros(N, bool)
MASK[[0, 3, 6, 9, 13, 14, 16, 17, 1, 2]] = True


def _pose(seed, max_angle=math.pi):
    rng = np.random.default_rng(seed)
    return Pose(np.stack([random_rotation(rng, max_angle) for _ in range(N)]), np.zeros(3))


def test_distance_identity_and_right_angle():
    a = Pose.identity(N)
    assert pose_distance(a, a, MASK) == 0.0
    R = a.rotations.copy()
    R[9] = axis_angle_matrix([0, 0, 1], math.pi / 2)
    assert pose_distance(a, Pose(R, np.zeros(3)), MASK) == pytest.approx(math.pi / 2, abs=1e-12)


def test_distance_ignores_uncovered_joints():
    a = Pose.identity(N)
    R = a.rotations.copy()
    R[~MASK] = axis_angle_matrix([1, 0, 0], 2.0)
    assert pose_distance(a, Pose(R, np.zeros(3)), MASK) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_distance_metric_properties(seed):
    a, b, c = _pose(seed), _pose(seed + 1), _pose(seed + 2)
    dab = pose_distance(a, b, MASK)
    assert dab == pytest.approx(pose_distance(b, a, MASK), abs=1e-12)
    assert dab <= pose_distance(a, c, MASK) + pose_distance(c, b, MASK) + 1e-9
    assert 0 <= dab <= MASK.sum() * math.pi + 1e-9


@given(st.integers(0, 2**32 - 1), st.permutations(list(np.flatnonzero(~MASK))))
def test_distance_invariant_to_reindexing_uncovered(seed, perm):
    a, b = _pose(seed), _pose(seed + 7)
    R = b.rotations.copy()
    R[np.flatnonzero(~MASK)] = b.rotations[perm]
    assert pose_distance(a, Pose(R, np.zeros(3)), MASK) == pose_distance(a, b, MASK)


def test_distance_small_angles_accurate():
    a = Pose.identity(N)
    R = a.rotations.copy()
    R[0] = axis_angle_matrix([0, 1, 0], 1e-7)
    assert pose_distance(a, Pose(R, np.zeros(3)), MASK) == pytest.approx(1e-7, rel=1e-6)


def test_knn_single_entry():
    db = PoseDatabase.from_poses([_pose(1)])
    assert knn_match(db, _pose(2), MASK, 1) == [0]


def test_knn_exact_match_first():
    poses = [_pose(s) for s in range(20)]
    db = PoseDatabase.from_poses(poses)
    assert knn_match(db, poses[13], MASK, 3)[0] == 13


def test_knn_equals_brute_force():
    poses = [_pose(s, 1.0) for s in range(500)]
    db = PoseDatabase.from_poses(poses)
    q = _pose(9999, 1.0)
    d = [pose_distance(q, p, MASK) for p in poses]
    brute = sorted(range(500), key=lambda i: (d[i], i))[:10]
    assert knn_match(db, q, MASK, 10) == brute


def test_knn_ties_to_lower_index():
    p = _pose(4)
    db = PoseDatabase.from_poses([_pose(5), p, _pose(6), p, p])
    assert knn_match(db, p, MASK, 3) == [1, 3, 4]


def test_knn_errors():
    with pytest.raises(InputError, match="empty"):
        knn_match(PoseDatabase.from_poses([]), _pose(0), MASK, 1)
    db = PoseDatabase.from_poses([_pose(0)])
    with pytest.raises(InputError):
        knn_match(db, _pose(0), MASK, 2)
    with pytest.raises(InputError):
        knn_match(db, Pose.identity(5), np.ones(5, bool), 1)


def test_crossover_takes_covered_from_estimate():
    e, d = _pose(1), _pose(2)
    e = e.replace(root_translation=np.array([1.0, 2.0, 3.0]))
    c = crossover(e, d, MASK)
    assert c.rotations[MASK].tobytes() == e.rotations[MASK].tobytes()
    assert c.rotations[~MASK].tobytes() == d.rotations[~MASK].tobytes()
    assert c.root_translation.tolist() == [1.0, 2.0, 3.0]
    assert crossover(e, d, np.ones(N, bool)).rotations.tobytes() == e.rotations.tobytes()
    assert crossover(e, d, np.zeros(N, bool)).rotations.tobytes() == d.rotations.tobytes()


def test_mutate_zero_epsilon_is_identity():
    p = _pose(3)
    assert mutate(p, MASK, MutationConfig(0.0, 5)).rotations.tobytes() == p.rotations.tobytes()


def test_mutate_bound_and_covered_untouched():
    p = _pose(3)
    eps = 0.2
    worst = 0.0
    for s in range(10_000 // (~MASK).sum() + 1):
        m = mutate(p, MASK, MutationConfig(eps, s))
        assert m.rotations[MASK].tobytes() == p.rotations[MASK].tobytes()
        assert all(is_rotation(R) for R in m.rotations)
        delta = np.swapaxes(p.rotations, 1, 2) @ m.rotations
        ang = np.arccos(np.clip((np.trace(delta, axis1=1, axis2=2) - 1) / 2, -1, 1))
        worst = max(worst, ang[~MASK].max())
    assert worst <= eps + 1e-9
    assert worst > 0.5 * eps


def test_mutate_rejects_bad_epsilon():
    with pytest.raises(InputError):
        MutationConfig(-0.1)
    with pytest.raises(InputError):
        MutationConfig(float("nan"))


def test_variants_single_entry_no_mutation():
    e, d = _pose(1), _pose(2)
    vs = generate_variants(PoseDatabase.from_poses([d]), e, MASK, 3, MutationConfig(0.0, 0))
    expected = crossover(e, d, MASK).rotations.tobytes()
    assert len(vs) == 3 and all(v.rotations.tobytes() == expected for v in vs)


def test_variants_are_distinct_and_keep_covered():
    e = _pose(1)
    db = PoseDatabase.from_poses([_pose(s) for s in range(10, 30)])
    vs = generate_variants(db, e, MASK, 8, MutationConfig(0.1, 42))
    blobs = {v.rotations.tobytes() for v in vs}
    assert len(blobs) == 8
    for v in vs:
        assert v.rotations[MASK].tobytes() == e.rotations[MASK].tobytes()
    again = generate_variants(db, e, MASK, 8, MutationConfig(0.1, 42))
    assert [v.rotations.tobytes() for v in again] == [v.rotations.tobytes() for v in vs]


def test_variants_cycle_over_donors():
    e = _pose(1)
    db = PoseDatabase.from_poses([_pose(s) for s in range(10, 20)])
    near = knn_match(db, e, MASK, 3)
    vs = generate_variants(db, e, MASK, 6, MutationConfig(0.0), k=3)
    for i, v in enumerate(vs):
        assert v.rotations.tobytes() == crossover(e, db.poses[near[i % 3]], MASK).rotations.tobytes()


def test_derive_seed_stable_and_distinct():
    assert derive_seed(0, "a") == derive_seed(0, "a")
    assert len({derive_seed(0, "a"), derive_seed(1, "a"), derive_seed(0, "b"), derive_seed(0, "a", 1)}) == 4
    assert 0 <= derive_seed(123, "x") < 2**63


def test_jsonl_roundtrip(tmp_path, tree):
    db = PoseDatabase.from_poses([random_pose(tree, np.random.default_rng(s)) for s in range(5)], [f"t{s}" for s in range(5)])
    db.save_jsonl(tmp_path / "db.jsonl")
    back = PoseDatabase.load_jsonl(tmp_path / "db.jsonl")
    assert back.tags == db.tags
    for a, b in zip(db.poses, back.poses):
        assert a.rotations.tobytes() == b.rotations.tobytes()
        assert a.root_translation.tobytes() == b.root_translation.tobytes()


def test_jsonl_errors_carry_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"rotations": []}\n{oops\n')
    with pytest.raises(InputError, match=r"bad.jsonl:1"):
        PoseDatabase.load_jsonl(p)
    p.write_text(p.read_text().splitlines()[1] + "\n")
    with pytest.raises(InputError, match=r"bad.jsonl:1:2"):
        PoseDatabase.load_jsonl(p)


def test_default_covered_mask(tree):
    m = cloth_mask(tree, ["pelvis", "spine1"])
    assert m.sum() == 2 and m[0] and m[3]


def test_chordal_metric():
    a = Pose.identity(N)
    R = a.rotations.copy()
    R[0] = axis_angle_matrix([0, 0, 1], math.pi / 2)
    b = Pose(R, np.zeros(3))
    # chordal distance of angle t is 2*sqrt(2)*sin(t/2)
    assert pose_distance(a, b, MASK, "chordal") == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(InputError, match="metric"):
        pose_distance(a, b, MASK, "manhattan")


def test_knn_chordal_agrees_on_small_angles():
    poses = [_pose(s, 0.3) for s in range(200)]
    db = PoseDatabase.from_poses(poses)
    q = _pose(777, 0.3)
    assert knn_match(db, q, MASK, 1, "chordal") == knn_match(db, q, MASK, 1)
