"""End-to-end fitting, evaluation, measurement editing and pose evolution on scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import BodyModel, Mesh, posed_joints, regress_joints, shape_mesh, skin
from .camera import DEFAULT_ANCHOR_NAMES, adaptive_depth, anchor_indices, back_project, place_body, project
from .errors import InputError
from .evolution import MutationConfig, PoseDatabase, derive_seed, generate_variants
from .ik import extract_twists, fit_root_rotation, solve_ik
from .kinematics import Pose, tree_from_joints
from .measurements import (
    LandmarkMap,
    MeasurementModel,
    MeasurementVector,
    ShapePosterior,
    bound_posterior,
    build_measurement_model,
    default_landmark_map,
    fit_shape,
    measurements_from_observations,
    mesh_measurements,
    sample_shape,
)
from .metrics import (
    COVERED_WEIGHT,
    UNCOVERED_WEIGHT,
    kpe_2d,
    keypoint_loss,
    make_report,
    mpjpe_c,
    pa_mpjpe_c,
    shape_errors,
    twist_loss,
    visibility_weights,
)
from .scenario import Scenario

MODEL_SAMPLES_PER_DIM = 40


@dataclass(frozen=True)
class FitOptions:
    anchors: tuple = DEFAULT_ANCHOR_NAMES
    temperature: float = 0.0
    seed: int = 0
    landmark_map: LandmarkMap | None = None
    covered_weight: float = COVERED_WEIGHT
    uncovered_weight: float = UNCOVERED_WEIGHT


@dataclass(frozen=True, eq=False)
class ShapeFit:
    model: BodyModel
    measurement_model: MeasurementModel
    observed: MeasurementVector
    posterior: ShapePosterior
    beta: np.ndarray
    depth: float


@dataclass(frozen=True, eq=False)
class FitResult:
    shape: ShapeFit
    pose: Pose
    translation: np.ndarray
    joints: np.ndarray  # camera space
    pixels: np.ndarray
    mesh: Mesh  # camera space

    @property
    def beta(self) -> np.ndarray:
        return self.shape.beta


def measurement_model_for(model: BodyModel, seed: int) -> MeasurementModel:
    return build_measurement_model(model, MODEL_SAMPLES_PER_DIM * model.shape_dims, derive_seed(seed, "measurement-model"))


def lift_joints(scn: Scenario, depth: float) -> np.ndarray:
    """Back-project the image joints using the root depth plus per-joint offsets."""
    return back_project(scn.camera, scn.image_joints, depth + scn.depth_offsets)


def _observation_depth(scn: Scenario, model: BodyModel, anchors) -> float:
    if scn.scene_depth is not None:
        return scn.scene_depth
    # no scene depth: place the mean-shape skeleton instead
    J = regress_joints(model, shape_mesh(model, np.zeros(model.shape_dims)))
    t = place_body(scn.camera, J, scn.image_joints, anchors, scn.tree, scn.visible)
    return float(J[scn.tree.root, 2] + t[2])


def observe(scn: Scenario, model: BodyModel, options: FitOptions) -> tuple[MeasurementVector, float]:
    """Measurement vector read from the scenario and the depth used to read it."""
    anchors = anchor_indices(scn.tree, options.anchors)
    depth = _observation_depth(scn, model, anchors)
    mapping = options.landmark_map or default_landmark_map()
    omega = measurements_from_observations(scn.tree, lift_joints(scn, depth), scn.landmarks, mapping, depth, scn.camera)
    return omega, depth


def fit_shape_from(model: BodyModel, mmodel: MeasurementModel, omega: MeasurementVector, noise: float, options: FitOptions):
    m = model.shape_dims
    post = bound_posterior(fit_shape(mmodel, omega, np.zeros(m), np.eye(m), noise=noise), model.beta_limit)
    beta = sample_shape(post, derive_seed(options.seed, "shape"), options.temperature)
    # shapes outside the box leave the range the body model was built for
    return post, np.clip(beta, -model.beta_limit, model.beta_limit)


def fit_shape_scenario(scn: Scenario, options: FitOptions = FitOptions(), model: BodyModel | None = None) -> ShapeFit:
    model = model or scn.build_model()
    _check_model(scn, model)
    mmodel = measurement_model_for(model, options.seed)
    omega, depth = observe(scn, model, options)
    post, beta = fit_shape_from(model, mmodel, omega, scn.measurement_noise, options)
    return ShapeFit(model, mmodel, omega, post, beta, depth)


def _check_model(scn: Scenario, model: BodyModel) -> None:
    if tuple(model.tree.names) != tuple(scn.tree.names) or tuple(model.tree.parents) != tuple(scn.tree.parents):
        raise InputError("scenario skeleton does not match the body model hierarchy")


def fit_pose(scn: Scenario, model: BodyModel, beta, options: FitOptions) -> tuple[Pose, np.ndarray]:
    """Place the shaped skeleton in the camera and solve IK against the lifted joints."""
    anchors = anchor_indices(scn.tree, options.anchors)
    J = regress_joints(model, shape_mesh(model, beta))
    tree = tree_from_joints(model.tree, J)
    t = place_body(scn.camera, J, scn.image_joints, anchors, tree, scn.visible)
    joints_cam = lift_joints(scn, float(J[tree.root, 2] + t[2]))
    root_rot = fit_root_rotation(tree, joints_cam)
    pose = solve_ik(tree, joints_cam, scn.twists, root_rot, np.zeros(3))
    return pose, t


def fit_scenario(scn: Scenario, options: FitOptions = FitOptions()) -> FitResult:
    """Shape from measurements, then placement and IK, then skinning."""
    shape = fit_shape_scenario(scn, options)
    pose, t = fit_pose(scn, shape.model, shape.beta, options)
    return _result(scn, shape, pose, t)


def _result(scn: Scenario, shape: ShapeFit, pose: Pose, t) -> FitResult:
    joints = posed_joints(shape.model, shape.beta, pose) + t
    mesh = skin(shape.model, shape.beta, pose)
    return FitResult(shape, pose, t, joints, project(scn.camera, joints), Mesh(mesh.vertices + t, mesh.faces))


def evaluate(scn: Scenario, model: BodyModel, pose: Pose, beta, translation, options: FitOptions = FitOptions()) -> dict:
    """Metric report of a prediction against the scenario's ground truth.

    Joint metrics need the ground-truth pose and translation; shape errors need
    the ground-truth beta. Missing pieces drop the corresponding fields.
    """
    gt = scn.ground_truth
    report: dict = {}
    if gt.pose is not None and gt.translation is not None:
        gt_beta = gt.beta if gt.beta is not None else np.asarray(beta, dtype=float)
        pred = posed_joints(model, beta, pose) + translation
        truth = posed_joints(model, gt_beta, gt.pose) + gt.translation
        mask = scn.cloth_mask
        report = make_report(
            mpjpe_c(pred, truth, mask),
            pa_mpjpe_c(pred, truth, mask),
            kpe_2d(project(scn.camera, pred), project(scn.camera, truth), mask),
            None,
        )
        w = visibility_weights(mask, options.covered_weight, options.uncovered_weight)
        shaped = tree_from_joints(model.tree, regress_joints(model, shape_mesh(model, beta)))
        gt_shaped = tree_from_joints(model.tree, regress_joints(model, shape_mesh(model, gt_beta)))
        report["keypoint_loss"] = keypoint_loss(pred, truth, w)
        report["twist_loss"] = twist_loss(extract_twists(shaped, pose), extract_twists(gt_shaped, gt.pose), w[1:])
    if gt.beta is not None:
        errs = shape_errors(model, beta, gt.beta)
        report["shape_errors_mm"] = {k: errs[f] for k, f in (("height", "height"), ("chest", "chest_width"), ("waist", "waist_width"), ("hips", "hips_width"))}
    return report


def refit_measurements(model: BodyModel, mmodel: MeasurementModel, omega: MeasurementVector, noise: float, options: FitOptions):
    """Refit shape to an (edited) measurement vector; returns the shape and its mesh measurements."""
    post, beta = fit_shape_from(model, mmodel, omega, noise, options)
    return beta, mesh_measurements(model, beta), post


def evolve_scenario(
    scn: Scenario, db: PoseDatabase, count: int, epsilon: float, k: int, options: FitOptions = FitOptions(), metric: str = "geodesic"
):
    """Fit the scenario, then diversify its uncovered joints from the database."""
    fit = fit_scenario(scn, options)
    config = MutationConfig(epsilon, derive_seed(options.seed, "evolve"))
    variants = generate_variants(db, fit.pose, scn.cloth_mask, count, config, k, metric)
    return fit, variants


def observation_depth_for(scn: Scenario, options: FitOptions = FitOptions()) -> float:
    model = scn.build_model()
    return _observation_depth(scn, model, anchor_indices(scn.tree, options.anchors))


__all__ = [
    "FitOptions",
    "FitResult",
    "ShapeFit",
    "adaptive_depth",
    "evaluate",
    "evolve_scenario",
    "fit_pose",
    "fit_scenario",
    "fit_shape_scenario",
    "lift_joints",
    "measurement_model_for",
    "observe",
    "refit_measurements",
]
