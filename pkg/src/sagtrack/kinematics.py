"""Kinematic skeleton with bone-attached Gaussians.

Each bone's world transform is ``parent * rest(offset, rotation) * D_1 * D_2 ...``
where the D_k are the bone's DOFs in declared order: rotations about, or
translations along, fixed local axes. Because every DOF is a one-parameter
motion about a known world axis, pose Jacobians are closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidPoseError
from .gaussian import Gaussian3D, _check_color, _check_covariance

DOF_TYPES = ("revolute", "prismatic", "global-translation")


@dataclass(frozen=True, eq=False)
class Bone:
    name: str
    parent: int
    offset: np.ndarray
    rest_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))


@dataclass(frozen=True, eq=False)
class Dof:
    name: str
    bone: int
    axis: np.ndarray
    type: str
    lower: float
    upper: float

    @property
    def revolute(self):
        return self.type == "revolute"


@dataclass(frozen=True, eq=False)
class ModelGaussian:
    bone: int
    mean: np.ndarray
    covariance: np.ndarray
    color: np.ndarray
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class Landmark:
    name: str
    bone: int
    position: np.ndarray


def skew(w):
    """Cross-product matrices for vectors ``w`` (..., 3)."""
    w = np.asarray(w, dtype=float)
    z = np.zeros(w.shape[:-1])
    return np.stack(
        [
            np.stack([z, -w[..., 2], w[..., 1]], -1),
            np.stack([w[..., 2], z, -w[..., 0]], -1),
            np.stack([-w[..., 1], w[..., 0], z], -1),
        ],
        -2,
    )


def axis_angle(axis, angle):
    """Rotation matrix for a unit ``axis`` and ``angle`` (Rodrigues)."""
    W = skew(axis)
    return np.eye(3) + np.sin(angle) * W + (1.0 - np.cos(angle)) * (W @ W)


class SkeletonModel:
    """Immutable skeleton, DOF table and attached Gaussians.

    Bones are stored parent-before-child; bone 0 is the single root.
    """

    def __init__(self, bones, dofs, gaussians, landmarks=(), name="model"):
        self.name = name
        self.bones = tuple(
            Bone(b.name, int(b.parent), np.asarray(b.offset, float), np.asarray(b.rest_rotation, float))
            for b in bones
        )
        self.dofs = tuple(
            Dof(d.name, int(d.bone), np.asarray(d.axis, float) / np.linalg.norm(d.axis), d.type,
                float(d.lower), float(d.upper))
            for d in dofs
        )
        self.gaussians = tuple(
            ModelGaussian(int(g.bone), np.asarray(g.mean, float), _check_covariance(g.covariance, 3),
                          _check_color(g.color), float(g.weight))
            for g in gaussians
        )
        self.landmarks = tuple(Landmark(l.name, int(l.bone), np.asarray(l.position, float)) for l in landmarks)
        self._validate()

        nb, nj = len(self.bones), len(self.dofs)
        self.bone_dofs = [[j for j, d in enumerate(self.dofs) if d.bone == b] for b in range(nb)]
        # ancestors-or-self mask, then DOFs driving each bone
        anc = np.zeros((nb, nb), bool)
        for b, bone in enumerate(self.bones):
            if bone.parent >= 0:
                anc[b] = anc[bone.parent]
            anc[b, b] = True
        self.bone_chain = np.zeros((nb, nj), bool)
        for j, d in enumerate(self.dofs):
            self.bone_chain[:, j] = anc[:, d.bone]
        self.gaussian_bone = np.array([g.bone for g in self.gaussians], dtype=int)
        self.chain = self.bone_chain[self.gaussian_bone]
        self.lower = np.array([d.lower for d in self.dofs])
        self.upper = np.array([d.upper for d in self.dofs])
        self.revolute = np.array([d.revolute for d in self.dofs])
        self.local_means = np.array([g.mean for g in self.gaussians]).reshape(-1, 3)
        self.local_covs = np.array([g.covariance for g in self.gaussians]).reshape(-1, 3, 3)
        self.local_precs = np.linalg.inv(self.local_covs) if len(self.gaussians) else self.local_covs
        self.colors = np.array([g.color for g in self.gaussians]).reshape(-1, 3)
        self.weights = np.array([g.weight for g in self.gaussians])

    def _validate(self):
        if not self.bones:
            raise InvalidInputError("model has no bones")
        roots = [i for i, b in enumerate(self.bones) if b.parent < 0]
        if roots != [0]:
            raise InvalidInputError("bone 0 must be the single root")
        names = set()
        for i, b in enumerate(self.bones):
            if b.name in names:
                raise InvalidInputError(f"duplicate bone name {b.name!r}")
            names.add(b.name)
            if i > 0 and not 0 <= b.parent < i:
                raise InvalidInputError(f"bone {b.name!r} must follow its parent")
            R = b.rest_rotation
            if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
                raise InvalidInputError(f"bone {b.name!r} rest rotation is not a rotation")
        for d in self.dofs:
            if d.type not in DOF_TYPES:
                raise InvalidInputError(f"DOF {d.name!r} has unknown type {d.type!r}")
            if not 0 <= d.bone < len(self.bones):
                raise InvalidInputError(f"DOF {d.name!r} references a missing bone")
            if not d.lower < d.upper:
                raise InvalidInputError(f"DOF {d.name!r} needs lower < upper")
        for g in self.gaussians:
            if not 0 <= g.bone < len(self.bones):
                raise InvalidInputError("Gaussian references a missing bone")
        for l in self.landmarks:
            if not 0 <= l.bone < len(self.bones):
                raise InvalidInputError(f"landmark {l.name!r} references a missing bone")

    @property
    def n_dofs(self):
        return len(self.dofs)

    @property
    def dof_names(self):
        return [d.name for d in self.dofs]

    def rest_pose(self):
        """Zero pose clamped into the limits."""
        return clamp_pose(self, np.zeros(self.n_dofs))

    def replace(self, bones=None, gaussians=None, dofs=None, landmarks=None, name=None):
        return SkeletonModel(
            self.bones if bones is None else bones,
            self.dofs if dofs is None else dofs,
            self.gaussians if gaussians is None else gaussians,
            self.landmarks if landmarks is None else landmarks,
            self.name if name is None else name,
        )


@dataclass(frozen=True, eq=False)
class PosedGaussians:
    """World-frame Gaussians of a posed model with dense per-DOF Jacobians.

    ``chain[i, j]`` is False where DOF j cannot move Gaussian i; the Jacobian
    rows there are exactly zero.
    """

    mean: np.ndarray          # (G, 3)
    covariance: np.ndarray    # (G, 3, 3)
    precision: np.ndarray     # (G, 3, 3)
    dmean: np.ndarray         # (G, J, 3)
    dprecision: np.ndarray    # (G, J, 3, 3)
    chain: np.ndarray         # (G, J)
    color: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.mean)

    def gaussians(self):
        return [Gaussian3D(m, c, col, w) for m, c, col, w in zip(self.mean, self.covariance, self.color, self.weight)]

    def dcovariance(self):
        """dSigma/dtheta recovered from dSigma^{-1}: -Sigma dP Sigma."""
        return -self.covariance[:, None] @ self.dprecision @ self.covariance[:, None]


def _check_pose(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_dofs,):
        raise InvalidPoseError(f"pose has {theta.size} values, model has {model.n_dofs} DOFs")
    return theta


def _fk(model, theta):
    nb, nj = len(model.bones), model.n_dofs
    Rs = np.empty((nb, 3, 3))
    ts = np.empty((nb, 3))
    axes = np.zeros((nj, 3))
    pivots = np.zeros((nj, 3))
    for b, bone in enumerate(model.bones):
        if bone.parent < 0:
            R, t = bone.rest_rotation.copy(), bone.offset.copy()
        else:
            Rp, tp = Rs[bone.parent], ts[bone.parent]
            R, t = Rp @ bone.rest_rotation, Rp @ bone.offset + tp
        for j in model.bone_dofs[b]:
            d = model.dofs[j]
            w = R @ d.axis
            axes[j] = w
            pivots[j] = t
            if d.revolute:
                R = R @ axis_angle(d.axis, theta[j])
            else:
                t = t + w * theta[j]
        Rs[b], ts[b] = R, t
    return Rs, ts, axes, pivots


def forward_kinematics(model: SkeletonModel, pose):
    """World rotation (B, 3, 3) and translation (B, 3) of every bone."""
    theta = _check_pose(model, pose)
    Rs, ts, _, _ = _fk(model, theta)
    return Rs, ts


def pose_model(model: SkeletonModel, pose) -> PosedGaussians:
    """Place every Gaussian in the world and differentiate it w.r.t. each DOF.

    Revolute DOF with world axis w through pivot p: dmu = w x (mu - p) and
    dSigma^{-1} = [w]x P - P [w]x. Translational DOF: dmu = w, dSigma^{-1} = 0.
    """
    theta = _check_pose(model, pose)
    Rs, ts, axes, pivots = _fk(model, theta)
    gb = model.gaussian_bone
    R = Rs[gb]
    mean = np.einsum("gij,gj->gi", R, model.local_means) + ts[gb]
    cov = R @ model.local_covs @ np.swapaxes(R, 1, 2)
    prec = R @ model.local_precs @ np.swapaxes(R, 1, 2)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    prec = 0.5 * (prec + np.swapaxes(prec, 1, 2))

    chain = model.chain
    rev = model.revolute
    rel = mean[:, None, :] - pivots[None, :, :]
    dmean = np.where(rev[None, :, None], np.cross(axes[None, :, :], rel), axes[None, :, :])
    dmean = dmean * chain[:, :, None]
    W = skew(axes)
    WP = W[None] @ prec[:, None]
    dprec = WP + np.swapaxes(WP, -1, -2)
    dprec = dprec * (chain & rev[None, :])[:, :, None, None]
    return PosedGaussians(mean, cov, prec, dmean, dprec, chain, model.colors, model.weights)


def landmark_positions(model: SkeletonModel, pose):
    """World positions of declared landmarks, or of Gaussian centres if none are declared."""
    Rs, ts = forward_kinematics(model, pose)
    if model.landmarks:
        return np.array([Rs[l.bone] @ l.position + ts[l.bone] for l in model.landmarks])
    gb = model.gaussian_bone
    return np.einsum("gij,gj->gi", Rs[gb], model.local_means) + ts[gb]


def gaussian_centers(model: SkeletonModel, pose):
    Rs, ts = forward_kinematics(model, pose)
    gb = model.gaussian_bone
    return np.einsum("gij,gj->gi", Rs[gb], model.local_means) + ts[gb]


def clamp_pose(model: SkeletonModel, pose):
    theta = _check_pose(model, pose)
    return np.clip(theta, model.lower, model.upper)
