"""Per-frame pose optimization and the sequence tracking loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .energy import EnergyConfig, EnergyProblem
from .errors import InvalidInputError, SagError
from .image_model import ImageSoG, QuadTreeConfig, quadtree_cluster
from .kinematics import SkeletonModel, clamp_pose, pose_model

log = logging.getLogger(__name__)

DIRECTIONS = ("trust-lp", "gradient", "sign", "bfgs")


@dataclass(frozen=True)
class OptimizerConfig:
    """Monotone ascent on the energy.

    ``direction`` picks the step rule:
      trust-lp   maximize the piecewise-linear model of the clamped energy
                 (one linear piece per image Gaussian, capped at E_qq) inside a
                 box trust region; the box is backtracked on rejection
      gradient   raw gradient scaled per DOF type (radians vs. world units)
      sign       per-DOF sign-based step adaptation
      bfgs       quasi-Newton direction started from the kinematic metric
    ``step`` is the initial trust length: the largest Gaussian-centre motion
    (world units) a first trial step may cause.
    """

    iterations: int = 10
    step: float = 4.0
    shrink: float = 0.5
    growth: float = 2.0
    epsilon: float = 1e-7
    gradient_tol: float = 1e-10
    max_backtracks: int = 12
    direction: str = "trust-lp"
    rotation_scale: float = 0.02
    translation_scale: float = 1.0
    damping: float = 1e-3

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if not 0 < self.shrink < 1:
            raise InvalidInputError("shrink must lie in (0, 1)")
        if self.growth < 1:
            raise InvalidInputError("growth must be >= 1")
        if self.step <= 0:
            raise InvalidInputError("step must be positive")
        if self.direction not in DIRECTIONS:
            raise InvalidInputError(f"direction must be one of {DIRECTIONS}")


@dataclass
class OptimizeResult:
    pose: np.ndarray
    value: float
    initial_value: float
    iterations: int
    evaluations: int
    history: List[float] = field(default_factory=list)
    report: Optional[object] = None


def kinematic_metric(model: SkeletonModel, theta):
    """sum_h J_h^T J_h over Gaussian centres: how far each DOF moves the model."""
    J = pose_model(model, theta).dmean  # (G, J, 3)
    return np.einsum("gja,gka->jk", J, J)


def _reach(model, theta):
    """Largest Gaussian-centre speed per unit change of each DOF."""
    J = pose_model(model, theta).dmean
    return np.sqrt((J * J).sum(-1)).max(axis=0) if len(J) else np.ones(model.n_dofs)


def _motion(model, theta, direction):
    """Largest Gaussian-centre displacement per unit step along ``direction`` (first order)."""
    v = np.einsum("gja,j->ga", pose_model(model, theta).dmean, direction)
    return float(np.sqrt((v * v).sum(axis=1).max())) if len(v) else 0.0


def _lp_step(model, theta, rep, radius):
    """Box-constrained maximizer of the local piecewise-linear energy model.

    Returns the step and the model's predicted gain. Image Gaussians whose
    linear piece cannot cross its cap anywhere in the box enter the objective
    as a plain linear term (or drop out), so only the undecided ones become
    LP constraints.
    """
    s, cap, G = rep.pieces
    nj = model.n_dofs
    lo = np.maximum(-radius, model.lower - theta)
    hi = np.minimum(radius, model.upper - theta)
    b = s - cap
    span = np.abs(G) @ np.maximum(np.abs(lo), np.abs(hi))
    below = b + span <= 0.0           # stays under the cap: linear
    mixed = ~below & (b - span < 0.0)  # may switch inside the box
    lin = rep.limit_gradient + G[below].sum(axis=0)
    Gm, bm = G[mixed], b[mixed]
    nq = len(bm)
    # variables [delta, t]; maximize lin . delta + sum t  s.t.  t_q <= b_q + G_q delta,  t_q <= 0
    c = np.concatenate([-lin, -np.ones(nq)])
    bounds = np.concatenate([np.stack([lo, hi], -1), np.tile([-np.inf, 0.0], (nq, 1))])
    if nq:
        A = sparse.hstack([sparse.csr_matrix(-Gm), sparse.identity(nq, format="csr")], format="csr")
        res = linprog(c, A_ub=A, b_ub=bm, bounds=bounds, method="highs")
    else:
        res = linprog(c, bounds=bounds, method="highs")
    if res.status != 0:
        return np.zeros(nj), 0.0
    d = res.x[:nj]
    model_gain = (np.minimum(b + G @ d, 0.0).sum() - np.minimum(b, 0.0).sum() + rep.limit_gradient @ d)
    return d, float(model_gain)


def optimize_pose(theta0, model: SkeletonModel, images, cfg: OptimizerConfig = OptimizerConfig(),
                  ecfg: EnergyConfig = None, problem: EnergyProblem = None) -> OptimizeResult:
    """Maximize the energy from ``theta0`` with at most ``cfg.iterations`` accepted steps.

    A step is accepted only if it raises the energy, so the result never scores
    below the (clamped) start. Every accepted pose is clamped to the limits.
    """
    if problem is None:
        if ecfg is None:
            raise InvalidInputError("either ecfg or problem is required")
        problem = EnergyProblem(model, images, ecfg)
    lp = cfg.direction == "trust-lp"
    theta = clamp_pose(model, theta0)
    rep = problem.evaluate(theta, pieces=lp)
    start_value = rep.value
    history = [rep.value]
    evals = 1
    n = model.n_dofs
    scale = np.where(model.revolute, cfg.rotation_scale, cfg.translation_scale) ** 2

    H_inv = None
    sign_step = np.sqrt(scale) * cfg.step / 8.0
    trust = cfg.step
    done = 0
    for _ in range(cfg.iterations):
        g = rep.gradient
        if not np.all(np.isfinite(g)):
            break
        if np.linalg.norm(g) < cfg.gradient_tol:
            break
        if not lp:
            if cfg.direction == "gradient":
                d = scale * g
            elif cfg.direction == "sign":
                d = np.sign(g) * sign_step
            else:
                if H_inv is None:
                    M = kinematic_metric(model, theta)
                    H_inv = np.linalg.inv(M + cfg.damping * (np.trace(M) / n + 1e-12) * np.eye(n))
                d = H_inv @ g
                if g @ d <= 0:
                    H_inv = None
                    d = scale * g
            motion = _motion(model, theta, d)
            alpha = 1.0 if cfg.direction == "sign" or motion == 0 else trust / motion
        reach = _reach(model, theta) if lp else None

        accepted = False
        backtracked = False
        for _ in range(cfg.max_backtracks):
            if lp:
                d, gain = _lp_step(model, theta, rep, trust / np.maximum(reach, 1e-12))
                cand = clamp_pose(model, theta + d)
            else:
                cand = clamp_pose(model, theta + alpha * d)
            if np.linalg.norm(cand - theta) < cfg.epsilon:
                break
            new = problem.evaluate(cand, pieces=lp)
            evals += 1
            if new.value > rep.value:
                accepted = True
                break
            backtracked = True
            if lp:
                trust *= cfg.shrink
            else:
                alpha *= cfg.shrink
                if cfg.direction == "sign":
                    sign_step = sign_step * cfg.shrink
        if not accepted:
            break

        step = cand - theta
        if lp:
            ratio = (new.value - rep.value) / gain if gain > 0 else 0.0
            if ratio > 0.75 and not backtracked:
                trust *= cfg.growth
            elif ratio < 0.25:
                trust *= cfg.shrink
        else:
            moved = _motion(model, theta, step)
            trust = max(moved * (1.0 if backtracked else cfg.growth), 1e-9)
            if cfg.direction == "bfgs" and H_inv is not None:
                y = rep.gradient - new.gradient  # gradient change of the negated energy
                sy = step @ y
                if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
                    rho = 1.0 / sy
                    V = np.eye(n) - rho * np.outer(step, y)
                    H_inv = V @ H_inv @ V.T + rho * np.outer(step, step)
            elif cfg.direction == "sign":
                flip = np.sign(new.gradient) != np.sign(g)
                sign_step = np.where(flip, sign_step * cfg.shrink, sign_step * 1.2)
        theta, rep = cand, new
        history.append(rep.value)
        done += 1
        if np.linalg.norm(step) < cfg.epsilon:
            break
    return OptimizeResult(theta, rep.value, start_value, done, evals, history, rep)


@dataclass
class TrackState:
    """The two most recent poses and the index of the next frame."""

    prev: Optional[np.ndarray] = None
    prev2: Optional[np.ndarray] = None
    frame: int = 0
    lost: bool = False

    @classmethod
    def start(cls, seed):
        return cls(np.asarray(seed, float).copy(), None, 0, False)

    def push(self, pose, lost=False):
        self.prev2 = self.prev
        self.prev = np.asarray(pose, float).copy()
        self.frame += 1
        self.lost = lost


def extrapolate_init(state: TrackState, model: SkeletonModel):
    """Start pose for the next frame: 2 theta_{t-1} - theta_{t-2}, clamped.

    With a single previous pose, or right after a lost frame, the previous pose
    is used as is.
    """
    if state.prev is None:
        raise InvalidInputError("extrapolation needs at least one previous pose")
    if state.prev2 is None or state.lost:
        return clamp_pose(model, state.prev)
    return clamp_pose(model, 2.0 * state.prev - state.prev2)


@dataclass
class FrameDiagnostics:
    frame: int
    value: float
    initial_value: float
    iterations: int
    evaluations: int
    lost: bool
    error: Optional[str] = None


@dataclass
class TrackResult:
    poses: List[np.ndarray]
    diagnostics: List[FrameDiagnostics]

    @property
    def lost_frames(self):
        return [d.frame for d in self.diagnostics if d.lost]


def _frame_sogs(frame, qcfg):
    return [item if isinstance(item, ImageSoG) else quadtree_cluster(item, qcfg) for item in frame]


def track_sequence(model: SkeletonModel, frames, ecfg: EnergyConfig, ocfg: OptimizerConfig = OptimizerConfig(),
                   seed_pose=None, qcfg: QuadTreeConfig = QuadTreeConfig(), loss_fraction=0.25) -> TrackResult:
    """Track a multi-camera sequence frame by frame.

    ``frames`` yields one list per frame holding, per camera, either an RGB image
    (clustered with ``qcfg``) or a ready ImageSoG. The first frame starts from
    ``seed_pose`` (rest pose by default). A frame whose final E_sim is zero or
    below ``loss_fraction`` times the running median of earlier frames is
    flagged lost, and the next frame restarts from the last pose without
    extrapolation. A frame whose evaluation fails keeps the previous pose and
    is recorded with its error.
    """
    seed = model.rest_pose() if seed_pose is None else clamp_pose(model, seed_pose)
    state = TrackState.start(seed)
    poses, diags, values = [], [], []
    for t, frame in enumerate(frames):
        init = extrapolate_init(state, model)
        try:
            sogs = _frame_sogs(frame, qcfg)
            if len(sogs) != len(ecfg.cameras):
                raise InvalidInputError(f"{len(sogs)} views for {len(ecfg.cameras)} cameras")
            res = optimize_pose(init, model, sogs, ocfg, ecfg)
        except SagError as exc:
            log.warning("frame %d: %s", t, exc)
            pose = state.prev.copy()
            poses.append(pose)
            diags.append(FrameDiagnostics(t, float("nan"), float("nan"), 0, 0, True, f"frame {t}: {exc}"))
            state.push(pose, lost=True)
            continue
        e_s = res.report.e_sim
        lost = e_s <= 0.0 or (len(values) > 0 and e_s < loss_fraction * float(np.median(values)))
        if lost:
            log.warning("frame %d: loss of track (E_sim %.4g)", t, e_s)
        else:
            values.append(e_s)
        poses.append(res.pose)
        diags.append(FrameDiagnostics(t, res.value, res.initial_value, res.iterations, res.evaluations, lost))
        state.push(res.pose, lost=lost)
    return TrackResult(poses, diags)
