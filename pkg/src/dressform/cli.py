"""Command-line interface.

Exit codes: 0 success, 2 bad input, 3 numerical degeneracy, 4 I/O failure.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .body import export_obj, shape_mesh, skin, synth_body_model
from .camera import PerspectiveCamera
from .errors import DegenerateError, DressformError, InputError
from .evolution import PoseDatabase
from .kinematics import Pose, dump_json, load_json, pose_from_json, pose_to_json
from .measurements import MEASUREMENT_NAMES, LandmarkMap, mesh_measurements
from .metrics import report_to_csv, report_to_json
from .pipeline import (
    FitOptions,
    evaluate,
    evolve_scenario,
    fit_scenario,
    measurement_model_for,
    observe,
    refit_measurements,
)
from .scenario import DEFAULT_NOISE, load_scenario, synth_scenario

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _options(args, config: dict) -> FitOptions:
    def pick(name, default):
        val = getattr(args, name, None)
        return val if val is not None else config.get(name, default)

    anchors = pick("anchors", None)
    if isinstance(anchors, str):
        anchors = tuple(a.strip() for a in anchors.split(",") if a.strip())
    mapping = config.get("landmark_map")
    weights = config.get("weights", {})
    kwargs = {
        "temperature": float(pick("temperature", 0.0)),
        "seed": int(pick("seed", 0)),
        "landmark_map": LandmarkMap.from_json(load_json(mapping)) if mapping else None,
        "covered_weight": float(weights.get("covered", 1.0)),
        "uncovered_weight": float(weights.get("uncovered", 0.2)),
    }
    if anchors:
        kwargs["anchors"] = tuple(anchors)
    return FitOptions(**kwargs)


def _beta_doc(beta) -> dict:
    return {"beta": [float(b) for b in beta]}


def _read_vector(path, key: str) -> np.ndarray:
    doc = load_json(path)
    try:
        return np.asarray(doc[key] if isinstance(doc, dict) else doc, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected {{{key!r}: [...]}}: {exc!r}") from None


# ------------------------------------------------------------------ commands


def cmd_synth(args, config) -> None:
    cam = config.get("camera")
    camera = PerspectiveCamera.from_json(cam) if cam else None
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    synth_scenario(seed, args.out, args.pose_db_size, camera, config.get("model"))


def cmd_fit(args, config) -> None:
    scn = load_scenario(args.scenario)
    opts = _options(args, config)
    fit = fit_scenario(scn, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(pose_to_json(fit.pose), out / "pose.json")
    dump_json(_beta_doc(fit.beta), out / "beta.json")
    dump_json({"translation": fit.translation.tolist()}, out / "translation.json")
    export_obj(fit.mesh, out / "mesh.obj")
    report = {
        "measurements": fit.shape.observed.to_json(),
        "observation_depth_m": fit.shape.depth,
        "posterior": fit.shape.posterior.to_json(),
    }
    metrics = evaluate(scn, fit.shape.model, fit.pose, fit.beta, fit.translation, opts)
    if metrics:
        report["metrics"] = metrics
    dump_json(report, out / "report.json")


def cmd_evolve(args, config) -> None:
    scn = load_scenario(args.scenario)
    opts = _options(args, config)
    db = PoseDatabase.load_jsonl(args.db)
    if len(db) == 0:
        raise InputError(f"{args.db}: pose database is empty")
    metric = args.metric or config.get("rotation_metric", "geodesic")
    fit, variants = evolve_scenario(scn, db, args.count, args.epsilon, args.k, opts, metric)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, pose in enumerate(variants):
        dump_json(pose_to_json(pose), out / f"variant_{i:03d}.json")
        mesh = skin(fit.shape.model, fit.beta, pose)
        export_obj(type(mesh)(mesh.vertices + fit.translation, mesh.faces), out / f"variant_{i:03d}.obj")


def _parse_edits(edits) -> dict:
    out = {}
    for item in edits or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"edit {item!r} must look like name=value")
        if name not in MEASUREMENT_NAMES:
            raise InputError(f"unknown measurement name {name!r}; expected one of {list(MEASUREMENT_NAMES)}")
        try:
            v = float(value)
        except ValueError:
            raise InputError(f"edit {item!r} has a non-numeric value") from None
        if not (np.isfinite(v) and v > 0):
            raise InputError(f"edit {item!r}: measurements must be positive")
        out[name] = v
    return out


def cmd_measure(args, config) -> None:
    edits = _parse_edits(args.edit)
    opts = _options(args, config)
    if args.scenario:
        scn = load_scenario(args.scenario)
        model = scn.build_model()
        omega, _ = observe(scn, model, opts)
        noise = scn.measurement_noise
    else:
        model = synth_body_model(24, **config.get("model", {}))
        beta0 = _read_vector(args.beta, "beta")
        omega = mesh_measurements(model, beta0)
        noise = float(config.get("measurement_noise", DEFAULT_NOISE))
    omega = omega.edited(**edits)
    beta, refit, _ = refit_measurements(model, measurement_model_for(model, opts.seed), omega, noise, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(_beta_doc(beta), out / "beta.json")
    dump_json({"observed": omega.to_json(), "refit": refit.to_json(), "edits": edits}, out / "measurements.json")
    export_obj(shape_mesh(model, beta), out / "mesh.obj")


def cmd_eval(args, config) -> None:
    scn = load_scenario(args.scenario)
    pred = Path(args.pred)
    model = scn.build_model()
    pose = pose_from_json(load_json(pred / "pose.json"))
    beta = _read_vector(pred / "beta.json", "beta")
    trans = _read_vector(pred / "translation.json", "translation")
    if pose.joint_count != scn.tree.joint_count:
        raise InputError(f"predicted pose has {pose.joint_count} joints, scenario has {scn.tree.joint_count}")
    if beta.shape != (model.shape_dims,) or trans.shape != (3,):
        raise InputError("predicted beta or translation has the wrong length")
    report = evaluate(scn, model, pose, beta, trans, _options(args, config))
    if "mpjpe_c_mm" not in report:
        raise InputError("scenario has no ground-truth pose and translation to evaluate against")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_to_json(report))
    out.with_suffix(".csv").write_text(report_to_csv(report))


def cmd_export_mesh(args, config) -> None:
    model = synth_body_model(24, **config.get("model", {}))
    beta = _read_vector(args.beta, "beta") if args.beta else np.zeros(model.shape_dims)
    pose = pose_from_json(load_json(args.pose)) if args.pose else Pose.identity(model.tree.joint_count)
    t = _read_vector(args.translation, "translation") if args.translation else np.zeros(3)
    mesh = skin(model, beta, pose)
    export_obj(type(mesh)(mesh.vertices + t, mesh.faces), args.out)


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dressform", description="Fit, diversify and evaluate parametric bodies from keypoints.")
    p.add_argument("--config", help="JSON file with defaults (camera, anchors, weights, landmark_map, model)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic scenario with ground truth and a pose database")
    s.add_argument("--seed", type=int)
    s.add_argument("--pose-db-size", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    def fit_flags(q):
        q.add_argument("--anchors", help="comma-separated anchor joint names (bone from each joint's parent)")
        q.add_argument("--temperature", type=float)
        q.add_argument("--seed", type=int)

    f = sub.add_parser("fit", help="fit shape, placement and pose to a scenario")
    f.add_argument("scenario")
    f.add_argument("--out", required=True)
    fit_flags(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evolve", help="fit, then generate pose variants from a database")
    e.add_argument("scenario")
    e.add_argument("--db", required=True)
    e.add_argument("--count", type=int, default=5)
    e.add_argument("--epsilon", type=float, default=0.1)
    e.add_argument("--k", type=int, default=5)
    e.add_argument("--metric", choices=("geodesic", "chordal"), help="rotation distance used for donor matching")
    e.add_argument("--out", required=True)
    fit_flags(e)
    e.set_defaults(func=cmd_evolve)

    m = sub.add_parser("measure", help="edit measurements and refit the shape")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario")
    src.add_argument("--beta")
    m.add_argument("--edit", action="append", metavar="NAME=VALUE")
    m.add_argument("--out", required=True)
    m.add_argument("--temperature", type=float)
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_measure)

    v = sub.add_parser("eval", help="score a fit directory against a scenario's ground truth")
    v.add_argument("pred")
    v.add_argument("scenario")
    v.add_argument("--out", required=True, help="report JSON path; a CSV is written next to it")
    v.set_defaults(func=cmd_eval)

    x = sub.add_parser("export-mesh", help="skin the body for a beta/pose and write OBJ")
    x.add_argument("--beta")
    x.add_argument("--pose")
    x.add_argument("--translation")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_mesh)
    return p


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_json(args.config) if args.config else {}
        if not isinstance(config, dict):
            raise InputError("config file must hold a JSON object")
        args.func(args, config)
    except InputError as exc:
        return _fail(EXIT_INPUT, exc)
    except (DegenerateError, DressformError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
