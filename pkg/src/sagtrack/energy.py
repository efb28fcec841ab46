"""Pose-fitting energy: clamped color-weighted overlap minus a joint-limit penalty.

For each camera the model Gaussians are projected (exactly, or with the
isotropic baseline) and compared with that camera's image Gaussians:

    E_sim = sum_cam sum_q min( sum_p w_p d(c_p, c_q) D_pq , E_qq )
    energy = E_sim - w_l * E_lim

The gradient follows the chain pose -> (mu_h, Sigma_h^-1) -> cone matrix ->
(mu_p, Sigma_p) -> D_pq, vectorized over Gaussians, DOFs and active pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .gaussian import ColorSimilarityConfig, color_similarity
from .kinematics import PosedGaussians, SkeletonModel, pose_model
from .projection import (
    NEAR_PLANE,
    CameraModel,
    ProjectionJacobian,
    cone_matrices,
    cone_matrix_derivatives,
    conic_derivatives,
    conic_to_gaussian,
    isotropic_project,
    to_camera,
)

PROJECTIONS = ("perspective", "isotropic")


@dataclass(frozen=True)
class EnergyConfig:
    cameras: Sequence[CameraModel]
    w_l: float = 0.1
    color: ColorSimilarityConfig = field(default_factory=ColorSimilarityConfig)
    projection: str = "perspective"
    # pairs beyond this Mahalanobis distance contribute < exp(-40.5) and are dropped
    prune_mahalanobis: float = 9.0

    def __post_init__(self):
        if self.w_l < 0:
            raise InvalidInputError("w_l must be nonnegative")
        if len(self.cameras) < 1:
            raise InvalidInputError("at least one camera is required")
        if self.projection not in PROJECTIONS:
            raise InvalidInputError(f"projection must be one of {PROJECTIONS}")

    def with_cameras(self, cameras):
        return EnergyConfig(list(cameras), self.w_l, self.color, self.projection, self.prune_mahalanobis)


@dataclass
class EnergyReport:
    value: float
    gradient: np.ndarray
    e_sim: float
    e_lim: float
    per_camera_sim: List[float]
    per_camera_gradient: List[np.ndarray]
    limit_gradient: np.ndarray
    clamped_count: int
    # smallest |s_q - E_qq| / E_qq over all image Gaussians with any overlap
    clamp_margin: float
    skipped: int = 0
    # per image Gaussian (summed overlap, cap E_qq, unclamped gradient rows), all cameras stacked
    pieces: Optional[tuple] = None


def e_lim(pose, model: SkeletonModel):
    """Quadratic penalty for DOF values outside their limits."""
    theta = np.asarray(pose, dtype=float)
    over = np.clip(theta - model.upper, 0.0, None)
    under = np.clip(model.lower - theta, 0.0, None)
    return float(np.sum(over**2 + under**2))


def e_lim_gradient(pose, model: SkeletonModel):
    theta = np.asarray(pose, dtype=float)
    return 2.0 * np.clip(theta - model.upper, 0.0, None) - 2.0 * np.clip(model.lower - theta, 0.0, None)


def d_dpq(p, dp: ProjectionJacobian, q):
    """Derivative of the overlap D_pq when p moves by (dmu_p, dSigma_p); q fixed.

    dD = D [ 1/2 tr(Sigma_p^-1 dSigma_p) - 1/2 tr(S^-1 dSigma_p) + 1/2 a^T dSigma_p a - a^T dmu_p ]
    with S = Sigma_p + Sigma_q and a = S^-1 (mu_p - mu_q). Leading axes of ``dp`` are kept.
    """
    from .gaussian import overlap_integral

    D = overlap_integral(p, q)
    S_inv = np.linalg.inv(p.covariance + q.covariance)
    a = S_inv @ (p.mean - q.mean)
    P_inv = np.linalg.inv(p.covariance)
    dS = np.asarray(dp.dsigma_p, float)
    dmu = np.asarray(dp.dmu_p, float)
    coef = 0.5 * (P_inv - S_inv + np.outer(a, a))
    return D * (np.einsum("ij,...ij->...", coef, dS) - dmu @ a)


class _Projected:
    """Projected model Gaussians for one camera (valid subset only)."""

    __slots__ = ("idx", "mu", "cov", "dmu", "dcov", "skipped")


def _project_camera(posed: PosedGaussians, cam: CameraModel, mode, need_grad, sigma3=None):
    out = _Projected()
    if need_grad:
        mu_c, prec_c, dmu_c, dprec_c = to_camera(cam, posed.mean, posed.precision, posed.dmean, posed.dprecision)
    else:
        mu_c, prec_c = to_camera(cam, posed.mean, posed.precision)
    K = cam.K
    if mode == "isotropic":
        ok = mu_c[:, 2] > NEAR_PLANE
        idx = np.flatnonzero(ok)
        eye = np.eye(2)
        if need_grad:
            mu_p, s_p, dmu_p, ds_p = isotropic_project(mu_c[idx], sigma3[idx], K, dmu_c[idx])
            out.dmu = dmu_p
            out.dcov = (2.0 * s_p[:, None] * ds_p)[..., None, None] * eye
        else:
            mu_p, s_p = isotropic_project(mu_c[idx], sigma3[idx], K)
        out.idx, out.mu, out.cov = idx, mu_p, (s_p**2)[:, None, None] * eye
        out.skipped = len(ok) - len(idx)
        return out

    d2 = np.einsum("gi,gij,gj->g", mu_c, prec_c, mu_c)
    M = cone_matrices(mu_c, prec_c)
    mu_p, sig_p, ell = conic_to_gaussian(M, K)
    ok = ell & (d2 > 1.0) & (mu_c[:, 2] > 0)
    idx = np.flatnonzero(ok)
    out.idx, out.mu, out.cov = idx, mu_p[idx], sig_p[idx]
    out.skipped = len(ok) - len(idx)
    if need_grad:
        dM = cone_matrix_derivatives(mu_c[idx, None], prec_c[idx, None], dmu_c[idx], dprec_c[idx])
        out.dmu, out.dcov = conic_derivatives(M[idx, None], dM, K)
    return out


class EnergyProblem:
    """Energy of a model against fixed per-camera image SoGs.

    Color similarities depend only on colors, so they are computed once here
    and reused for every pose evaluated during a frame.
    """

    def __init__(self, model: SkeletonModel, images, cfg: EnergyConfig):
        images = list(images)
        if len(images) != len(cfg.cameras):
            raise InvalidInputError(f"{len(images)} image SoGs for {len(cfg.cameras)} cameras")
        self.model = model
        self.images = images
        self.cfg = cfg
        self.sigma3 = None
        if cfg.projection == "isotropic":
            covs = model.local_covs
            var = covs[:, 0, 0]
            iso = np.abs(covs - var[:, None, None] * np.eye(3)).max(axis=(1, 2)) <= 1e-9 * var
            if not np.all(iso):
                raise InvalidInputError("isotropic projection needs a model of spherical Gaussians")
            self.sigma3 = np.sqrt(var)
        self._pairs = [_color_pairs(model.colors, img, cfg.color) for img in images]

    def evaluate(self, pose, gradient=True, pieces=False) -> EnergyReport:
        """Energy and (optionally) its gradient at ``pose``.

        With ``pieces`` the report also carries, for every image Gaussian of every
        camera, its summed overlap, its cap and the unclamped gradient of the sum:
        everything needed for a piecewise-linear model of E_sim around ``pose``.
        """
        model, cfg = self.model, self.cfg
        theta = np.asarray(pose, dtype=float)
        posed = pose_model(model, theta)
        nj = model.n_dofs
        per_sim, per_grad = [], []
        clamped = 0
        margin = np.inf
        skipped = 0
        rows = [] if pieces else None
        for cam, img, pairs in zip(cfg.cameras, self.images, self._pairs):
            val, grad, nclamp, marg, nskip = _camera_terms(posed, cam, img, pairs, cfg, gradient or pieces,
                                                           self.sigma3, rows)
            per_sim.append(val)
            per_grad.append(grad if gradient else None)
            clamped += nclamp
            margin = min(margin, marg)
            skipped += nskip
        e_s = float(sum(per_sim))
        e_l = e_lim(theta, model)
        lim_grad = -cfg.w_l * e_lim_gradient(theta, model)
        total_grad = None
        if gradient:
            total_grad = np.zeros(nj)
            for g in per_grad:
                total_grad += g
            total_grad += lim_grad
        return EnergyReport(
            value=e_s - cfg.w_l * e_l,
            gradient=total_grad,
            e_sim=e_s,
            e_lim=e_l,
            per_camera_sim=per_sim,
            per_camera_gradient=per_grad,
            limit_gradient=lim_grad,
            clamped_count=clamped,
            clamp_margin=float(margin),
            skipped=skipped,
            pieces=None if rows is None else _stack_pieces(rows, nj),
        )



def _stack_pieces(rows, nj):
    if not rows:
        return np.zeros(0), np.zeros(0), np.zeros((0, nj))
    return (np.concatenate([r[0] for r in rows]), np.concatenate([r[1] for r in rows]),
            np.concatenate([r[2] for r in rows]))


def _color_pairs(model_colors, img, color_cfg):
    sim = color_similarity(model_colors[:, None, :], img.colors[None, :, :], color_cfg)
    sim = np.asarray(sim).reshape(len(model_colors), len(img))
    pi, qi = np.nonzero(sim)
    return pi, qi, sim[pi, qi]


def _camera_terms(posed, cam, img, pairs, cfg, need_grad, sigma3=None, rows=None):
    nj = posed.dmean.shape[1]
    Q = len(img)
    grad = np.zeros(nj)
    if Q == 0:
        return 0.0, grad, 0, np.inf, 0
    proj = _project_camera(posed, cam, cfg.projection, need_grad, sigma3)
    # map model index -> row in the projected subset
    row = np.full(len(posed), -1)
    row[proj.idx] = np.arange(len(proj.idx))
    pi_all, qi_all, sim_all = pairs
    keep = row[pi_all] >= 0
    pi, qi, sim = row[pi_all[keep]], qi_all[keep], sim_all[keep]

    cov_p, cov_q = proj.cov, img.covariances
    s00 = cov_p[pi, 0, 0] + cov_q[qi, 0, 0]
    s01 = cov_p[pi, 0, 1] + cov_q[qi, 0, 1]
    s11 = cov_p[pi, 1, 1] + cov_q[qi, 1, 1]
    det_s = s00 * s11 - s01 * s01
    delta = proj.mu[pi] - img.means[qi]
    a0 = (s11 * delta[:, 0] - s01 * delta[:, 1]) / det_s
    a1 = (s00 * delta[:, 1] - s01 * delta[:, 0]) / det_s
    m2 = delta[:, 0] * a0 + delta[:, 1] * a1
    det_p = cov_p[:, 0, 0] * cov_p[:, 1, 1] - cov_p[:, 0, 1] ** 2
    det_q = cov_q[:, 0, 0] * cov_q[:, 1, 1] - cov_q[:, 0, 1] ** 2
    live = m2 <= cfg.prune_mahalanobis**2
    D = np.where(live, 2.0 * np.pi * np.sqrt(det_p[pi] * det_q[qi] / det_s) * np.exp(-0.5 * np.where(live, m2, 0.0)), 0.0)
    w_model = posed.weight[proj.idx]
    E = w_model[pi] * sim * D
    s_q = np.bincount(qi, weights=E, minlength=Q)
    e_qq = img.self_overlap
    value = float(np.minimum(s_q, e_qq).sum())
    unclamped = s_q < e_qq
    touched = s_q > 0
    nclamp = int(np.count_nonzero(~unclamped & (e_qq > 0)))
    margin = float(np.min(np.abs(s_q[touched] - e_qq[touched]) / e_qq[touched])) if touched.any() else np.inf
    if not need_grad:
        return value, grad, nclamp, margin, proj.skipped

    wt = E * unclamped[qi]
    P = len(proj.idx)
    inv00, inv01, inv11 = s11 / det_s, -s01 / det_s, s00 / det_s
    wsum = np.bincount(pi, weights=wt, minlength=P)
    g00 = np.bincount(pi, weights=0.5 * wt * (a0 * a0 - inv00), minlength=P)
    g01 = np.bincount(pi, weights=0.5 * wt * (a0 * a1 - inv01), minlength=P)
    g11 = np.bincount(pi, weights=0.5 * wt * (a1 * a1 - inv11), minlength=P)
    gm0 = np.bincount(pi, weights=-wt * a0, minlength=P)
    gm1 = np.bincount(pi, weights=-wt * a1, minlength=P)

    dcov, dmu = proj.dcov, proj.dmu
    # 1/2 tr(Sigma_p^-1 dSigma_p) with the 2x2 inverse written out
    tr_term = 0.5 * (cov_p[:, 1, 1, None] * dcov[..., 0, 0] - 2.0 * cov_p[:, 0, 1, None] * dcov[..., 0, 1]
                     + cov_p[:, 0, 0, None] * dcov[..., 1, 1]) / det_p[:, None]
    per_p = (wsum[:, None] * tr_term
             + g00[:, None] * dcov[..., 0, 0] + 2.0 * g01[:, None] * dcov[..., 0, 1] + g11[:, None] * dcov[..., 1, 1]
             + gm0[:, None] * dmu[..., 0] + gm1[:, None] * dmu[..., 1])
    grad = per_p.sum(axis=0)
    if rows is not None:
        # unclamped derivative of every image Gaussian's summed overlap
        h00 = 0.5 * (a0 * a0 - inv00)
        h01 = 0.5 * (a0 * a1 - inv01)
        h11 = 0.5 * (a1 * a1 - inv11)
        pair = E[:, None] * (tr_term[pi] + h00[:, None] * dcov[pi, :, 0, 0] + 2.0 * h01[:, None] * dcov[pi, :, 0, 1]
                             + h11[:, None] * dcov[pi, :, 1, 1] - a0[:, None] * dmu[pi, :, 0] - a1[:, None] * dmu[pi, :, 1])
        # only image Gaussians with at least one live pair can change
        uq, inv = np.unique(qi, return_inverse=True)
        flat = (inv[:, None] * nj + np.arange(nj)).ravel()
        Gq = np.bincount(flat, weights=pair.ravel(), minlength=len(uq) * nj).reshape(len(uq), nj)
        rows.append((s_q[uq], e_qq[uq], Gq))
    return value, grad, nclamp, margin, proj.skipped


def e_sim(posed: PosedGaussians, images, cfg: EnergyConfig):
    """Clamped similarity of already-posed Gaussians, summed over cameras."""
    images = list(images)
    if len(images) != len(cfg.cameras):
        raise InvalidInputError(f"{len(images)} image SoGs for {len(cfg.cameras)} cameras")
    sigma3 = np.sqrt(posed.covariance[:, 0, 0]) if cfg.projection == "isotropic" else None
    total = 0.0
    for cam, img in zip(cfg.cameras, images):
        pairs = _color_pairs(posed.color, img, cfg.color)
        total += _camera_terms(posed, cam, img, pairs, cfg, False, sigma3)[0]
    return total


def total_energy(pose, model: SkeletonModel, images, cfg: EnergyConfig) -> EnergyReport:
    return EnergyProblem(model, images, cfg).evaluate(pose, gradient=True)
