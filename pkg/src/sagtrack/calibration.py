"""Greedy shape calibration: global hand proportions plus per-Gaussian axis scales."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .energy import EnergyConfig, EnergyProblem
from .errors import InvalidInputError, ParseError
from .kinematics import Bone, Landmark, ModelGaussian, SkeletonModel
from .tracker import OptimizerConfig, optimize_pose

log = logging.getLogger(__name__)

GLOBAL_PARAMS = ("scale", "palm_width", "finger_length")


@dataclass(frozen=True)
class ShapeParams:
    """Multiplicative shape factors; all ones is the base model.

    scale          every length
    palm_width     root-frame x extent of the root bone's Gaussians and of the
                   offsets of its child bones
    finger_length  offsets of bones below the root's children, and the
                   Gaussians and landmarks of non-root bones along their
                   direction from the bone origin
    axes           (G, 3) standard-deviation factors along each Gaussian's local
                   principal axes, ordered by increasing eigenvalue
    """

    scale: float = 1.0
    palm_width: float = 1.0
    finger_length: float = 1.0
    axes: Optional[np.ndarray] = None

    def vector(self, n_gaussians):
        axes = np.ones((n_gaussians, 3)) if self.axes is None else np.asarray(self.axes, float)
        return np.concatenate([[self.scale, self.palm_width, self.finger_length], axes.ravel()])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, float)
        return cls(v[0], v[1], v[2], v[3:].reshape(-1, 3))


def _stretch(u, f):
    """I + (f - 1) u u^T for a unit vector u."""
    return np.eye(3) + (f - 1.0) * np.outer(u, u)


def scale_axes(cov, factors):
    """Scale a covariance's standard deviations along its principal axes."""
    evals, evecs = np.linalg.eigh(cov)
    out = evecs @ np.diag(evals * np.asarray(factors, float) ** 2) @ evecs.T
    return 0.5 * (out + out.T)


def apply_shape(model: SkeletonModel, params: ShapeParams) -> SkeletonModel:
    v = params.vector(len(model.gaussians))
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise InvalidInputError("shape factors must be positive")
    axes = v[3:].reshape(-1, 3)
    s, w, l = v[:3]
    Tw = _stretch(np.array([1.0, 0.0, 0.0]), w)

    def along(x, f):
        n = np.linalg.norm(x)
        return x if n == 0 else _stretch(x / n, f) @ x

    bones = []
    for b, bone in enumerate(model.bones):
        off = bone.offset
        if bone.parent == 0:
            off = Tw @ off
        elif bone.parent > 0:
            off = l * off
        bones.append(Bone(bone.name, bone.parent, s * off, bone.rest_rotation))
    gs = []
    for g, ax in zip(model.gaussians, axes):
        cov = g.covariance if np.all(ax == 1.0) else scale_axes(g.covariance, ax)
        mean = g.mean
        if g.bone == 0:
            mean, cov = Tw @ mean, Tw @ cov @ Tw
        else:
            n = np.linalg.norm(mean)
            if n > 0:
                T = _stretch(mean / n, l)
                mean, cov = T @ mean, T @ cov @ T
        gs.append(ModelGaussian(g.bone, s * mean, s * s * cov, g.color, g.weight))
    lms = [Landmark(lm.name, lm.bone, s * (Tw @ lm.position if lm.bone == 0 else along(lm.position, l)))
           for lm in model.landmarks]
    return model.replace(bones=bones, gaussians=gs, landmarks=lms)


@dataclass(frozen=True)
class CalibrationConfig:
    """Coordinate-wise greedy search schedule.

    Every candidate move multiplies one parameter by (1 + delta) or
    (1 - delta) and is kept only if it raises the summed energy. With
    ``rule="best"`` each round tries every move and keeps the single best
    one, repeating until none helps; ``rule="cyclic"`` sweeps the parameters
    in order and keeps each improving move as soon as it is found. delta
    starts at ``initial_step`` and is multiplied by ``step_decay`` after each
    pass.
    """

    passes: int = 5
    initial_step: float = 0.10
    step_decay: float = 0.5
    rule: str = "best"
    max_rounds: int = 50
    calibrate_global: bool = True
    calibrate_axes: bool = True
    gaussians: Optional[Sequence[int]] = None
    refine_pose: bool = False
    pose_iterations: int = 10

    def __post_init__(self):
        if self.passes < 0:
            raise InvalidInputError("passes must be >= 0")
        if not 0 < self.initial_step < 1:
            raise InvalidInputError("initial_step must lie in (0, 1)")
        if not 0 < self.step_decay <= 1:
            raise InvalidInputError("step_decay must lie in (0, 1]")
        if self.rule not in ("best", "cyclic"):
            raise InvalidInputError("rule must be 'best' or 'cyclic'")


def calibration_objective(model: SkeletonModel, frames, ecfg: EnergyConfig):
    """Summed energy over (pose, per-camera ImageSoGs) calibration frames."""
    return float(sum(EnergyProblem(model, imgs, ecfg).evaluate(pose, gradient=False).value for pose, imgs in frames))


def calibrate_model(model: SkeletonModel, frames, ecfg: EnergyConfig, cfg: CalibrationConfig = CalibrationConfig(),
                    callback=None) -> SkeletonModel:
    """The base model reshaped by :func:`fit_shape`; zero passes return ``model`` itself."""
    if cfg.passes == 0:
        return model
    return apply_shape(model, fit_shape(model, frames, ecfg, cfg, callback))


def fit_shape(model: SkeletonModel, frames, ecfg: EnergyConfig, cfg: CalibrationConfig = CalibrationConfig(),
              callback=None) -> ShapeParams:
    """Fit shape factors to calibration frames by greedy coordinate search.

    ``frames`` is a list of (rough pose, per-camera ImageSoGs). With
    ``refine_pose`` the poses are re-optimized against the current shape at
    the start of every pass. ``callback(name, value, objective)`` is called
    after every accepted change.
    """
    frames = [(np.asarray(p, float), list(imgs)) for p, imgs in frames]
    if not frames:
        raise InvalidInputError("calibration needs at least one frame")
    G = len(model.gaussians)
    v = ShapeParams().vector(G)
    names = list(GLOBAL_PARAMS) + [f"g{g}_axis{a}" for g in range(G) for a in range(3)]
    free = []
    if cfg.calibrate_global:
        free += [0, 1, 2]
    if cfg.calibrate_axes:
        sel = range(G) if cfg.gaussians is None else cfg.gaussians
        free += [3 + 3 * g + a for g in sel for a in range(3)]

    def objective(vec):
        return calibration_objective(apply_shape(model, ShapeParams.from_vector(vec)), frames, ecfg)

    def moved(k, f):
        t = v.copy()
        t[k] *= f
        return t

    best = objective(v)
    delta = cfg.initial_step
    for p in range(cfg.passes):
        if cfg.refine_pose:
            cur = apply_shape(model, ShapeParams.from_vector(v))
            ocfg = OptimizerConfig(iterations=cfg.pose_iterations)
            frames = [(optimize_pose(pose, cur, imgs, ocfg, ecfg).pose, imgs) for pose, imgs in frames]
            best = objective(v)
        for _ in range(cfg.max_rounds):
            accepted = 0
            if cfg.rule == "best":
                trials = [(objective(moved(k, f)), k, f) for k in free for f in (1.0 + delta, 1.0 - delta)]
                val, k, f = max(trials, key=lambda x: x[0]) if trials else (best, None, None)
                if val > best:
                    v, best = moved(k, f), val
                    accepted = 1
                    if callback is not None:
                        callback(names[k], float(v[k]), best)
            else:
                for k in free:
                    for f in (1.0 + delta, 1.0 - delta):
                        t = moved(k, f)
                        val = objective(t)
                        if val > best:
                            v, best = t, val
                            accepted += 1
                            if callback is not None:
                                callback(names[k], float(v[k]), best)
                            break
            if not accepted:
                break
        log.info("calibration pass %d: delta %.4f objective %.6g", p, delta, best)
        delta *= cfg.step_decay
    return ShapeParams.from_vector(v)


def save_shape(params: ShapeParams, path):
    axes = None if params.axes is None else np.asarray(params.axes, float).tolist()
    data = {"format": "sagtrack-shape/1", "scale": params.scale, "palm_width": params.palm_width,
            "finger_length": params.finger_length, "axes": axes}
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def load_shape(path) -> ShapeParams:
    try:
        data = json.loads(Path(path).read_text())
        if data.get("format") != "sagtrack-shape/1":
            raise ParseError("expected format 'sagtrack-shape/1'", path)
        axes = data.get("axes")
        return ShapeParams(float(data["scale"]), float(data["palm_width"]), float(data["finger_length"]),
                           None if axes is None else np.asarray(axes, float).reshape(-1, 3))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed shape file ({exc})", path) from exc
