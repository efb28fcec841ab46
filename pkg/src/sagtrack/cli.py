"""Command-line front end: ``sagtrack {synth,track,calibrate,eval,project-debug,bench}``.

Frame directories hold one file per (frame, camera) named ``f<frame>_c<camera>``
with suffix ``.sog`` (image Gaussians) or an image suffix (clustered on load).
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .errors import SagError

log = logging.getLogger("sagtrack")

FRAME_RE = re.compile(r"^f(\d+)_c(\d+)\.(sog|png|jpg|jpeg|bmp|ppm|tif|tiff)$", re.IGNORECASE)


def _thread_limit(n):
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _model(args):
    from .hand import default_hand_model
    from .io import load_model

    model = default_hand_model() if args.model in (None, "default") else load_model(args.model)
    if getattr(args, "calibration", None):
        from .calibration import apply_shape, load_shape

        model = apply_shape(model, load_shape(args.calibration))
    return model


def _energy_config(args, cameras):
    from .energy import EnergyConfig

    return EnergyConfig(cameras, w_l=args.wl, projection=args.projection)


def _optimizer_config(args):
    from .tracker import OptimizerConfig

    return OptimizerConfig(iterations=args.iterations, direction=args.direction)


def frame_files(directory, n_cameras):
    """Per-frame lists of per-camera files, frames in index order."""
    table = {}
    for p in sorted(Path(directory).iterdir()):
        m = FRAME_RE.match(p.name)
        if m:
            table.setdefault(int(m.group(1)), {})[int(m.group(2))] = p
    if not table:
        raise SagError(f"{directory}: no frame files named f<frame>_c<camera>.<ext>")
    frames = []
    for f in sorted(table):
        cams = table[f]
        if sorted(cams) != list(range(n_cameras)):
            raise SagError(f"{directory}: frame {f} has cameras {sorted(cams)}, expected 0..{n_cameras - 1}")
        frames.append([cams[c] for c in range(n_cameras)])
    return frames


def _load_view(path, qcfg):
    from .image_model import quadtree_cluster
    from .io import load_image_sog

    if path.suffix.lower() == ".sog":
        return load_image_sog(path)
    from PIL import Image

    with Image.open(path) as im:
        return quadtree_cluster(np.asarray(im.convert("RGB")), qcfg)


def _quadtree_config(args):
    from .image_model import QuadTreeConfig

    return QuadTreeConfig(max_depth=args.qt_depth, color_variance_threshold=args.qt_threshold,
                          min_block=args.qt_min_block, value_floor=args.qt_value_floor)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    from dataclasses import replace

    from .io import (default_scene_spec, load_scene, save_cameras, save_image_sog, save_model, save_poses,
                     save_scene_spec, scene_from_dict)
    from .synth import NoiseConfig, synth_render

    if args.scene:
        scene = load_scene(args.scene)
    else:
        scene = scene_from_dict(default_scene_spec())
    if args.cameras is not None:
        if not 1 <= args.cameras <= len(scene.cameras):
            raise SagError(f"--cameras must lie in 1..{len(scene.cameras)}")
        scene.cameras = scene.cameras[:args.cameras]
    if args.seed is not None:
        scene.seed = args.seed
    noise = scene.noise
    if args.noise_jitter is not None:
        noise = replace(noise, mean_jitter_px=args.noise_jitter)
    if args.noise_color is not None:
        noise = replace(noise, color_jitter=args.noise_color)
    if args.noise_dropout is not None:
        noise = replace(noise, dropout=args.noise_dropout)
    scene.noise = NoiseConfig(noise.mean_jitter_px, noise.color_jitter, noise.dropout)

    out = Path(args.out)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    save_model(scene.model, out / "model.json")
    save_cameras(scene.cameras, out / "cameras.txt")
    save_poses(scene.trajectory, out / "truth.csv", scene.model.dof_names)
    if not args.scene:
        save_scene_spec(default_scene_spec(), out / "scene.json")
    for f in range(len(scene)):
        for c, sog in enumerate(synth_render(scene, f)):
            save_image_sog(sog, frames_dir / f"f{f:04d}_c{c}.sog")
    print(f"wrote {len(scene)} frames x {len(scene.cameras)} cameras to {out}")
    return 0


def cmd_track(args):
    from .io import format_metrics, load_cameras, load_poses, save_poses
    from .metrics import compute_metrics
    from .tracker import track_sequence

    model = _model(args)
    cameras = load_cameras(args.cameras)
    qcfg = _quadtree_config(args)
    files = frame_files(args.frames, len(cameras))
    frames = ([_load_view(p, qcfg) for p in views] for views in files)
    seed = None
    if args.init_pose:
        seed = load_poses(args.init_pose, model.n_dofs)[0]
    result = track_sequence(model, frames, _energy_config(args, cameras), _optimizer_config(args),
                            seed_pose=seed, qcfg=qcfg, loss_fraction=args.loss_fraction)
    save_poses(result.poses, args.out, model.dof_names)
    for d in result.diagnostics:
        flag = " LOST" if d.lost else ""
        msg = f" {d.error}" if d.error else ""
        print(f"frame {d.frame}: energy {d.value:.6g} (start {d.initial_value:.6g}) "
              f"iterations {d.iterations} evaluations {d.evaluations}{flag}{msg}")
    if args.truth:
        truth = load_poses(args.truth, model.n_dofs)
        print(format_metrics(compute_metrics(result.poses, truth, model, sites=args.sites)), end="")
    return 0


def cmd_calibrate(args):
    from .calibration import CalibrationConfig, apply_shape, fit_shape, save_shape
    from .io import load_cameras, load_poses, save_model

    model = _model(args)
    cameras = load_cameras(args.cameras)
    qcfg = _quadtree_config(args)
    files = frame_files(args.frames, len(cameras))
    poses = load_poses(args.poses, model.n_dofs)
    if len(poses) < len(files):
        raise SagError(f"{args.poses}: {len(poses)} poses for {len(files)} frames")
    frames = [(poses[i], [_load_view(p, qcfg) for p in views]) for i, views in enumerate(files)]
    cfg = CalibrationConfig(passes=args.passes, refine_pose=args.refine_pose, pose_iterations=args.iterations)
    params = fit_shape(model, frames, _energy_config(args, cameras), cfg,
                       callback=lambda name, v, obj: log.info("accepted %s=%.4f (objective %.6g)", name, v, obj))
    save_shape(params, args.out)
    if args.model_out:
        save_model(apply_shape(model, params), args.model_out)
    print(f"scale={params.scale:.6g} palm_width={params.palm_width:.6g} finger_length={params.finger_length:.6g}")
    return 0


def cmd_eval(args):
    from .io import format_metrics, load_poses
    from .metrics import compute_metrics

    model = _model(args)
    tracked = load_poses(args.poses, model.n_dofs)
    truth = load_poses(args.truth, model.n_dofs)
    text = format_metrics(compute_metrics(tracked, truth, model, sites=args.sites))
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_project_debug(args):
    from .gaussian import Gaussian3D
    from .io import load_cameras
    from .overlay import emit_overlay
    from .projection import CameraModel, project_gaussian_world

    if args.cov is not None:
        xx, yy, zz, xy, xz, yz = args.cov
        cov = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
    else:
        cov = args.sigma ** 2 * np.eye(3)
    g = Gaussian3D(np.array(args.mean), cov, np.array(args.color))
    if args.cameras:
        cams = load_cameras(args.cameras)
        if not 0 <= args.camera_index < len(cams):
            raise SagError(f"--camera-index must lie in 0..{len(cams) - 1}")
        cam = cams[args.camera_index]
    else:
        w, h = args.image_size
        K = np.array([[args.focal, 0.0, w / 2.0], [0.0, args.focal, h / 2.0], [0.0, 0.0, 1.0]])
        cam = CameraModel(K, image_size=(w, h))
    p = project_gaussian_world(g, cam)
    print(f"mu_p = {p.mean[0]:.12g} {p.mean[1]:.12g}")
    print(f"Sigma_p = {p.covariance[0, 0]:.12g} {p.covariance[0, 1]:.12g} {p.covariance[1, 1]:.12g}")
    if args.out:
        emit_overlay(tuple(cam.image_size), [p], args.out)
        print(f"overlay written to {args.out}")
    return 0


def cmd_bench(args):
    from .bench import TARGET_MS, bench_frame

    rep = bench_frame(args.images, args.cameras, args.iterations, args.repeats, args.seed, args.direction)
    print(rep.format(), end="")
    if not rep.meets_target:
        print(f"warning: {rep.ms_per_frame:.1f} ms per frame exceeds the {TARGET_MS:g} ms target", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_energy_flags(p):
    p.add_argument("--iterations", type=int, default=10, help="ascent iterations per frame (default 10)")
    p.add_argument("--wl", type=float, default=0.1, help="joint-limit penalty weight (default 0.1)")
    p.add_argument("--direction", default="trust-lp", choices=["trust-lp", "gradient", "sign", "bfgs"])
    p.add_argument("--projection", default="perspective", choices=["perspective", "isotropic"],
                   help="isotropic: sphere-only baseline projection (model must be spherical)")


def _add_model_flags(p, calibration=True):
    p.add_argument("--model", default="default", help="model JSON (default: bundled hand)")
    if calibration:
        p.add_argument("--calibration", help="shape file written by 'calibrate'")


def _add_quadtree_flags(p):
    p.add_argument("--qt-depth", type=int, default=8)
    p.add_argument("--qt-threshold", type=float, default=0.02)
    p.add_argument("--qt-min-block", type=int, default=2)
    p.add_argument("--qt-value-floor", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(prog="sagtrack", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=0, help="limit BLAS/OpenMP threads (0: library default)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="render a synthetic scene to image-Gaussian frames plus ground truth")
    p.add_argument("--scene", help="scene spec JSON (default: built-in 5-camera scene)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cameras", type=int, help="use only the first N cameras")
    p.add_argument("--seed", type=int, help="noise seed (overrides the scene spec)")
    p.add_argument("--noise-jitter", type=float, help="image-Gaussian mean jitter sigma in pixels")
    p.add_argument("--noise-color", type=float, help="HSV color jitter sigma")
    p.add_argument("--noise-dropout", type=float, help="probability of dropping an image Gaussian")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="track a frame sequence")
    _add_model_flags(p)
    p.add_argument("--cameras", required=True, help="camera file")
    p.add_argument("--frames", required=True, help="frame directory")
    p.add_argument("--out", required=True, help="pose CSV to write")
    p.add_argument("--init-pose", help="pose CSV whose first row seeds frame 0 (default: rest pose)")
    p.add_argument("--truth", help="ground-truth pose CSV; prints metrics when given")
    p.add_argument("--sites", default="landmarks", choices=["landmarks", "centers"])
    p.add_argument("--loss-fraction", type=float, default=0.25)
    _add_energy_flags(p)
    _add_quadtree_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("calibrate", help="fit hand shape factors to calibration frames")
    _add_model_flags(p, calibration=False)
    p.add_argument("--cameras", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--poses", required=True, help="rough pose per calibration frame (CSV)")
    p.add_argument("--out", required=True, help="shape file to write")
    p.add_argument("--model-out", help="also write the reshaped model JSON")
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--refine-pose", action="store_true", help="re-optimize poses before every pass")
    _add_energy_flags(p)
    _add_quadtree_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="error statistics of tracked poses against ground truth")
    _add_model_flags(p)
    p.add_argument("--poses", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--sites", default="landmarks", choices=["landmarks", "centers"])
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project-debug", help="project one 3D Gaussian and draw its 1-sigma ellipse")
    p.add_argument("--mean", type=float, nargs=3, required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--cov", type=float, nargs=6, metavar=("XX", "YY", "ZZ", "XY", "XZ", "YZ"))
    grp.add_argument("--sigma", type=float, help="isotropic standard deviation")
    p.add_argument("--color", type=float, nargs=3, default=[0.0, 0.0, 1.0], help="HSV color")
    p.add_argument("--cameras", help="camera file (default: camera at the origin looking down +z)")
    p.add_argument("--camera-index", type=int, default=0)
    p.add_argument("--focal", type=float, default=500.0)
    p.add_argument("--image-size", type=int, nargs=2, default=[320, 240])
    p.add_argument("--out", help="overlay image to write")
    p.set_defaults(func=cmd_project_debug)

    p = sub.add_parser("bench", help="time one frame at realistic size")
    p.add_argument("--images", type=int, default=500, help="image Gaussians per camera")
    p.add_argument("--cameras", type=int, default=5)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", default="trust-lp", choices=["trust-lp", "gradient", "sign", "bfgs"])
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except (SagError, OSError) as exc:
        print(f"sagtrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
