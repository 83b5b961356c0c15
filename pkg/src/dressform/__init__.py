"""Keypoint-driven parametric body fitting.

Twist-swing inverse kinematics, bone-ratio camera depth, shape inference
from body measurements, database-driven pose variation and the matching
evaluation metrics, all over a small procedural body model.
"""
from .body import BodyModel, Mesh, export_obj, load_obj, regress_joints, shape_mesh, skin, synth_body_model
from .camera import PerspectiveCamera, adaptive_depth, place_body, project
from .errors import DegenerateError, DressformError, InputError
from .evolution import MutationConfig, PoseDatabase, crossover, generate_variants, knn_match, mutate, pose_distance
from .ik import extract_twists, fit_root_rotation, rodrigues, solve_ik, swing_from_vectors, twist_rotation
from .kinematics import KinematicTree, Pose, bone_vectors, build_tree, default_tree, forward_kinematics
from .measurements import (
    MeasurementVector,
    ShapePosterior,
    axial_measurements,
    bound_posterior,
    build_measurement_model,
    fit_shape,
    mesh_measurements,
    radial_measurements,
    sample_shape,
)
from .metrics import keypoint_loss, kpe_2d, mpjpe_c, pa_mpjpe_c, procrustes_align, shape_errors, twist_loss

__version__ = "0.1.0"
