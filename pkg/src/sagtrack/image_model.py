"""Quad-tree approximation of RGB frames by isotropic 2D Gaussians."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from matplotlib.colors import rgb_to_hsv

from .errors import InvalidInputError
from .gaussian import Gaussian2D

TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class ImageSoG:
    """Image Gaussians stored as arrays: means (Q, 2), covariances (Q, 2, 2), HSV colors (Q, 3)."""

    means: np.ndarray
    covariances: np.ndarray
    colors: np.ndarray
    source_size: tuple = (0, 0)
    self_overlap: Optional[np.ndarray] = None

    @classmethod
    def from_arrays(cls, means, sigmas, colors, source_size=(0, 0)):
        means = np.asarray(means, dtype=float).reshape(-1, 2)
        sigmas = np.asarray(sigmas, dtype=float).reshape(-1)
        covs = sigmas[:, None, None] ** 2 * np.eye(2)
        return precompute_self_overlap(cls(means, covs, np.asarray(colors, float).reshape(-1, 3), tuple(source_size)))

    @classmethod
    def from_gaussians(cls, gaussians, source_size=(0, 0)):
        gaussians = list(gaussians)
        means = np.array([g.mean for g in gaussians]).reshape(-1, 2)
        covs = np.array([g.covariance for g in gaussians]).reshape(-1, 2, 2)
        colors = np.array([g.color for g in gaussians]).reshape(-1, 3)
        return precompute_self_overlap(cls(means, covs, colors, tuple(source_size)))

    def __len__(self):
        return len(self.means)

    @property
    def sigmas(self):
        """Isotropic standard deviation (geometric mean of the axes for anisotropic entries)."""
        det = self.covariances[:, 0, 0] * self.covariances[:, 1, 1] - self.covariances[:, 0, 1] ** 2
        return det ** 0.25

    @property
    def isotropic(self):
        c = self.covariances
        return bool(np.all(np.abs(c[:, 0, 1]) <= 1e-12 * c[:, 0, 0])
                    and np.all(np.abs(c[:, 0, 0] - c[:, 1, 1]) <= 1e-12 * c[:, 0, 0]))

    @property
    def gaussians(self):
        return [Gaussian2D(m, c, col) for m, c, col in zip(self.means, self.covariances, self.colors)]

    def subset(self, mask):
        out = ImageSoG(self.means[mask], self.covariances[mask], self.colors[mask], self.source_size)
        return precompute_self_overlap(out)


def precompute_self_overlap(sog: ImageSoG) -> ImageSoG:
    """Fill E_qq = D_qq * d(c_q, c_q) = pi * sqrt(|Sigma_q|) for every image Gaussian."""
    c = sog.covariances
    det = c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] * c[:, 1, 0]
    sog.self_overlap = np.pi * np.sqrt(det)
    return sog


@dataclass(frozen=True)
class QuadTreeConfig:
    max_depth: int = 8
    color_variance_threshold: float = 0.02
    min_block: int = 2
    background_mask: Optional[np.ndarray] = None
    value_floor: float = 0.0

    def __post_init__(self):
        if self.max_depth < 1 or self.min_block < 1:
            raise InvalidInputError("max_depth and min_block must be >= 1")

    @property
    def root_side(self):
        return self.min_block * 2 ** (self.max_depth - 1)


class Leaf(NamedTuple):
    x: int
    y: int
    w: int
    h: int
    side: int
    emitted: bool
    color: np.ndarray
    variance: float


def to_hsv(image):
    """HSV float image from an 8-bit or [0, 1] float RGB array."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] < 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise InvalidInputError("expected a nonempty H x W x 3 RGB image")
    rgb = image[..., :3]
    rgb = rgb.astype(float) / 255.0 if rgb.dtype == np.uint8 else rgb.astype(float)
    return rgb_to_hsv(np.clip(rgb, 0.0, 1.0))


class _BlockStats:
    """Summed-area tables giving O(1) masked HSV mean and hue-wrapped variance per block."""

    def __init__(self, hsv, valid):
        ang = TWO_PI * hsv[..., 0]
        w = valid.astype(float)
        chans = [w, w * np.cos(ang), w * np.sin(ang), w * hsv[..., 1], w * hsv[..., 2],
                 w * hsv[..., 1] ** 2, w * hsv[..., 2] ** 2]
        stack = np.stack(chans, axis=-1)
        sat = np.zeros((stack.shape[0] + 1, stack.shape[1] + 1, stack.shape[2]))
        sat[1:, 1:] = stack.cumsum(0).cumsum(1)
        self.sat = sat

    def __call__(self, x0, y0, x1, y1):
        s = self.sat
        tot = s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]
        n = tot[0]
        if n <= 0:
            return 0.0, None, 0.0
        c, si, ms, mv, ms2, mv2 = tot[1:] / n
        r2 = min(c * c + si * si, 1.0)
        hue = (np.arctan2(si, c) / TWO_PI) % 1.0
        # circular hue spread on a circle of unit circumference
        var = (1.0 - r2) / TWO_PI**2 + max(ms2 - ms * ms, 0.0) + max(mv2 - mv * mv, 0.0)
        return n, np.array([hue, ms, mv]), var


def _block_color(hsv, valid):
    """Mean HSV of the valid pixels of a block, hue averaged on the circle.

    Computed from the pixels themselves rather than the summed-area tables so
    that identical blocks get bit-identical colors.
    """
    px = hsv[valid]
    ang = TWO_PI * px[:, 0]
    hue = (np.arctan2(np.sin(ang).mean(), np.cos(ang).mean()) / TWO_PI) % 1.0
    return np.array([hue, px[:, 1].mean(), px[:, 2].mean()])


def quadtree_leaves(image, cfg: QuadTreeConfig = QuadTreeConfig()):
    """All leaf blocks in canonical depth-first order (roots row-major, children TL, TR, BL, BR)."""
    hsv = to_hsv(image)
    H, W = hsv.shape[:2]
    valid = np.ones((H, W), bool)
    if cfg.background_mask is not None:
        mask = np.asarray(cfg.background_mask, bool)
        if mask.shape != (H, W):
            raise InvalidInputError("background_mask must match the image size")
        valid = ~mask
    stats = _BlockStats(hsv, valid)
    leaves = []

    def visit(x, y, side):
        x1, y1 = min(x + side, W), min(y + side, H)
        if x >= W or y >= H:
            return
        area = (x1 - x) * (y1 - y)
        n, color, var = stats(x, y, x1, y1)
        can_split = side > cfg.min_block
        if n == 0:
            leaves.append(Leaf(x, y, x1 - x, y1 - y, side, False, None, 0.0))
            return
        clipped = x1 - x < side or y1 - y < side
        if can_split and (clipped or n < area or var > cfg.color_variance_threshold):
            half = side // 2
            for dy in (0, half):
                for dx in (0, half):
                    visit(x + dx, y + dy, half)
            return
        color = _block_color(hsv[y:y1, x:x1], valid[y:y1, x:x1])
        emit = color[2] >= cfg.value_floor
        leaves.append(Leaf(x, y, x1 - x, y1 - y, side, bool(emit), color, var))

    root = cfg.root_side
    for y in range(0, H, root):
        for x in range(0, W, root):
            visit(x, y, root)
    return leaves


def quadtree_cluster(image, cfg: QuadTreeConfig = QuadTreeConfig()) -> ImageSoG:
    """Approximate an RGB frame by one isotropic Gaussian per color-homogeneous leaf block.

    Leaf blocks of side s become Gaussians centred on the block with sigma = s / 2
    (sqrt(w h) / 2 for blocks clipped by the image border).
    """
    image = np.asarray(image)
    leaves = [l for l in quadtree_leaves(image, cfg) if l.emitted]
    H, W = image.shape[:2]
    if not leaves:
        return ImageSoG.from_arrays(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 3)), (W, H))
    means = np.array([(l.x + l.w / 2.0, l.y + l.h / 2.0) for l in leaves])
    sigmas = np.array([np.sqrt(l.w * l.h) / 2.0 for l in leaves])
    colors = np.array([l.color for l in leaves])
    return ImageSoG.from_arrays(means, sigmas, colors, (W, H))
