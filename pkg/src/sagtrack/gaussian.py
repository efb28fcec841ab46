"""Unnormalized anisotropic Gaussian primitives.

Both the 3D body model and the 2D image approximation are sums of these blobs.
Every Gaussian peaks at 1 (no normalization constant) and carries an HSV color
with components in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCovarianceError, InvalidInputError, InvalidTransformError

MAX_CONDITION = 1e12
SYMMETRY_TOL = 1e-12


def _check_covariance(cov, dim):
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (dim, dim):
        raise InvalidInputError(f"covariance must be {dim}x{dim}, got {cov.shape}")
    scale = max(np.abs(cov).max(), 1.0)
    if np.abs(cov - cov.T).max() > SYMMETRY_TOL * scale:
        raise DegenerateCovarianceError("covariance is not symmetric")
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0 or not np.all(np.isfinite(eig)):
        raise DegenerateCovarianceError(f"covariance is not positive-definite (eigenvalues {eig})")
    if eig[-1] / eig[0] > MAX_CONDITION:
        raise DegenerateCovarianceError(f"covariance condition number {eig[-1] / eig[0]:.3g} exceeds 1e12")
    return cov


def _check_color(color):
    color = np.asarray(color, dtype=float)
    if color.shape != (3,):
        raise InvalidInputError("color must be an HSV 3-vector")
    if np.any(color < 0) or np.any(color > 1):
        raise InvalidInputError(f"HSV color components must lie in [0, 1], got {color}")
    return color


@dataclass(frozen=True, eq=False)
class _Gaussian:
    mean: np.ndarray
    covariance: np.ndarray
    color: np.ndarray = field(default_factory=lambda: np.zeros(3))
    weight: float = 1.0

    dim = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (self.dim,):
            raise InvalidInputError(f"mean must be a {self.dim}-vector, got shape {mean.shape}")
        cov = _check_covariance(self.covariance, self.dim)
        color = _check_color(self.color)
        if self.weight < 0:
            raise InvalidInputError("weight must be nonnegative")
        for name, value in (("mean", mean), ("covariance", cov), ("color", color)):
            value = value.copy()
            value.flags.writeable = False
            object.__setattr__(self, name, value)
        object.__setattr__(self, "weight", float(self.weight))

    def replace(self, **changes):
        kw = dict(mean=self.mean, covariance=self.covariance, color=self.color, weight=self.weight)
        kw.update(changes)
        return type(self)(**kw)


class Gaussian3D(_Gaussian):
    """3D blob: mean (3,), SPD covariance (3, 3), HSV color, weight."""

    dim = 3


class Gaussian2D(_Gaussian):
    """2D blob in pixel coordinates."""

    dim = 2


@dataclass(frozen=True)
class ColorSimilarityConfig:
    """Support radius of the Wendland color kernel in normalized HSV distance."""

    support_radius: float = 0.15

    def __post_init__(self):
        if not self.support_radius > 0:
            raise InvalidInputError("support_radius must be positive")


def eval_gaussian(g, x):
    """Value of the unnormalized Gaussian ``g`` at point ``x``."""
    x = np.asarray(x, dtype=float)
    d = x - g.mean
    return float(np.exp(-0.5 * d @ np.linalg.solve(g.covariance, d)))


def hsv_distance(c_p, c_q):
    """Euclidean HSV distance with the hue difference wrapped to [-0.5, 0.5].

    Broadcasts over leading axes.
    """
    diff = np.asarray(c_p, dtype=float) - np.asarray(c_q, dtype=float)
    dh = diff[..., 0] - np.round(diff[..., 0])
    return np.sqrt(dh * dh + diff[..., 1] ** 2 + diff[..., 2] ** 2)


def wendland(r):
    """C2 Wendland function (1 - r)^4 (4r + 1) on [0, 1], zero beyond."""
    r = np.asarray(r, dtype=float)
    t = np.clip(1.0 - r, 0.0, None)
    out = t**4 * (4.0 * r + 1.0)
    return np.where(r >= 1.0, 0.0, out)


def color_similarity(c_p, c_q, cfg=None):
    cfg = cfg or ColorSimilarityConfig()
    val = wendland(hsv_distance(c_p, c_q) / cfg.support_radius)
    return float(val) if np.ndim(val) == 0 else val


def transform_gaussian3d(g, R, t):
    """Rigidly move ``g``: mean -> R mean + t, covariance -> R cov R^T."""
    R = np.asarray(R, dtype=float)
    t = np.asarray(t, dtype=float)
    if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
        raise InvalidTransformError("R must be a proper rotation matrix")
    cov = R @ g.covariance @ R.T
    cov = 0.5 * (cov + cov.T)
    return g.replace(mean=R @ g.mean + t, covariance=cov)


def overlap_integral(p, q):
    """Closed-form integral of the product of two unnormalized 2D Gaussians."""
    S = p.covariance + q.covariance
    det_s = np.linalg.det(S)
    if not det_s > 0 or np.linalg.cond(S) > MAX_CONDITION:
        raise DegenerateCovarianceError("sum of covariances is singular")
    d = p.mean - q.mean
    m2 = d @ np.linalg.solve(S, d)
    det_pq = np.linalg.det(p.covariance) * np.linalg.det(q.covariance)
    return float(2.0 * np.pi * np.sqrt(det_pq / det_s) * np.exp(-0.5 * m2))


def pair_energy(p, q, cfg=None):
    """Color-weighted overlap E_pq = d(c_p, c_q) * D_pq."""
    d = color_similarity(p.color, q.color, cfg)
    if d == 0.0:
        return 0.0
    return d * overlap_integral(p, q)
