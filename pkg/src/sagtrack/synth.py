"""Synthetic multi-camera scenes with known ground truth.

The renderer poses the model, projects each Gaussian exactly into every
camera and turns each projection into an image Gaussian. By default the image
Gaussian is isotropic with the same footprint area (radius |Sigma_p|^(1/4)),
mirroring the isotropic image side of the energy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from matplotlib.colors import hsv_to_rgb

from .image_model import ImageSoG, precompute_self_overlap
from .kinematics import SkeletonModel, clamp_pose, pose_model
from .projection import CameraModel, cone_matrices, conic_to_gaussian, to_camera

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseConfig:
    mean_jitter_px: float = 0.0
    color_jitter: float = 0.0
    dropout: float = 0.0

    @property
    def active(self):
        return self.mean_jitter_px > 0 or self.color_jitter > 0 or self.dropout > 0


@dataclass
class SyntheticScene:
    model: SkeletonModel
    trajectory: List[np.ndarray]
    cameras: List[CameraModel]
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    isotropic: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.cameras:
            raise ValueError("a scene needs at least one camera")
        self.trajectory = [clamp_pose(self.model, t) for t in self.trajectory]

    def __len__(self):
        return len(self.trajectory)


def default_rig(n=5, distance=550.0, focal=300.0, target=(0.0, 90.0, 0.0), image_size=(320, 240)):
    """Up to five cameras spread around the hand, the first facing the palm."""
    dirs = np.array([
        [0.0, 0.0, 1.0],
        [0.94, 0.0, 0.34],
        [-0.94, 0.0, 0.34],
        [0.0, 0.82, 0.57],
        [0.3, -0.6, -0.74],
    ])
    if not 1 <= n <= len(dirs):
        raise ValueError("default rig has 1 to 5 cameras")
    target = np.asarray(target, float)
    cams = []
    for d in dirs[:n]:
        d = d / np.linalg.norm(d)
        up = (0.0, 0.0, 1.0) if abs(d[1]) > 0.7 else (0.0, 1.0, 0.0)
        cams.append(CameraModel.look_at(target + distance * d, target, focal, image_size, up=up))
    return cams


def render_gaussians(model: SkeletonModel, pose, cam: CameraModel, isotropic=True):
    """Projected (means, covariances, colors, ok-mask) of every model Gaussian in one camera."""
    posed = pose_model(model, pose)
    mu_c, prec_c = to_camera(cam, posed.mean, posed.precision)
    d2 = np.einsum("gi,gij,gj->g", mu_c, prec_c, mu_c)
    mu_p, cov_p, ell = conic_to_gaussian(cone_matrices(mu_c, prec_c), cam.K)
    ok = ell & (d2 > 1.0) & (mu_c[:, 2] > 0)
    if isotropic:
        det = cov_p[:, 0, 0] * cov_p[:, 1, 1] - cov_p[:, 0, 1] ** 2
        r2 = np.sqrt(np.abs(det))
        cov_p = r2[:, None, None] * np.eye(2)
    return mu_p, cov_p, posed.color.copy(), ok


def render_rgb(model: SkeletonModel, pose, cam: CameraModel, background=(0, 0, 0), extent=1.5):
    """Rasterize the posed model as flat-colored ellipses (8-bit RGB, H x W x 3).

    Each Gaussian fills its ``extent``-sigma projected ellipse in its own
    color; Gaussians are painted far to near so nearer ones occlude.
    """
    W, H = cam.image_size
    img = np.empty((H, W, 3), np.uint8)
    img[:] = np.asarray(background, np.uint8)
    posed = pose_model(model, pose)
    mu_p, cov_p, col, ok = render_gaussians(model, pose, cam, isotropic=False)
    depth = (posed.mean @ cam.R.T + cam.t)[:, 2]
    rgb = np.round(hsv_to_rgb(np.clip(col, 0.0, 1.0)) * 255).astype(np.uint8)
    ys, xs = np.mgrid[0:H, 0:W]
    pix = np.stack([xs + 0.5, ys + 0.5], -1)
    for g in np.argsort(-depth):
        if not ok[g]:
            continue
        r = extent * np.sqrt(np.linalg.eigvalsh(cov_p[g]).max())
        x0, x1 = int(max(mu_p[g, 0] - r, 0)), int(min(mu_p[g, 0] + r + 1, W))
        y0, y1 = int(max(mu_p[g, 1] - r, 0)), int(min(mu_p[g, 1] + r + 1, H))
        if x0 >= x1 or y0 >= y1:
            continue
        d = pix[y0:y1, x0:x1] - mu_p[g]
        m = np.einsum("...i,ij,...j->...", d, np.linalg.inv(cov_p[g]), d)
        img[y0:y1, x0:x1][m <= extent**2] = rgb[g]
    return img


def synth_render(scene: SyntheticScene, frame: int, rng=None) -> List[ImageSoG]:
    """Per-camera image SoGs of the ground-truth pose at ``frame``.

    Noise, when configured, is drawn from ``rng`` (default: seeded from the
    scene seed and frame index, so repeated calls agree).
    """
    if not 0 <= frame < len(scene.trajectory):
        raise IndexError(f"frame {frame} outside trajectory of length {len(scene.trajectory)}")
    if rng is None:
        rng = np.random.default_rng([scene.seed, frame])
    noise = scene.noise
    out = []
    skipped = 0
    for cam in scene.cameras:
        mu, cov, col, ok = render_gaussians(scene.model, scene.trajectory[frame], cam, scene.isotropic)
        skipped += int(np.count_nonzero(~ok))
        mu, cov, col = mu[ok], cov[ok], col[ok]
        if noise.mean_jitter_px > 0:
            mu = mu + rng.normal(0.0, noise.mean_jitter_px, mu.shape)
        if noise.color_jitter > 0:
            col = col + rng.normal(0.0, noise.color_jitter, col.shape)
            col[:, 0] %= 1.0
            col[:, 1:] = np.clip(col[:, 1:], 0.0, 1.0)
        if noise.dropout > 0:
            keep = rng.random(len(mu)) >= noise.dropout
            mu, cov, col = mu[keep], cov[keep], col[keep]
        out.append(precompute_self_overlap(ImageSoG(mu, cov, col, cam.image_size)))
    if skipped:
        log.warning("synth_render: %d degenerate projections skipped", skipped)
    return out


def linear_trajectory(model: SkeletonModel, start, end, n_frames):
    start, end = np.asarray(start, float), np.asarray(end, float)
    if n_frames == 1:
        return [clamp_pose(model, start)]
    return [clamp_pose(model, start + (end - start) * k / (n_frames - 1)) for k in range(n_frames)]


def random_pose(model: SkeletonModel, rng, spread=0.35, translation=(0.0, 0.0, 0.0), global_rot=0.3):
    """A plausible random pose: finger DOFs inside their limits, mild global rotation."""
    lo, hi = model.lower, model.upper
    theta = np.zeros(model.n_dofs)
    for j, d in enumerate(model.dofs):
        if d.type != "revolute":
            continue
        if d.bone == 0:
            theta[j] = rng.uniform(-global_rot, global_rot)
        else:
            span = hi[j] - lo[j]
            mid = lo[j] + 0.5 * span
            theta[j] = np.clip(mid + rng.uniform(-0.5, 0.5) * spread * span - 0.25 * span,
                               lo[j] + 0.05 * span, hi[j] - 0.05 * span)
    trans = [j for j, d in enumerate(model.dofs) if d.type != "revolute"]
    theta[trans[:3]] = translation
    return theta
