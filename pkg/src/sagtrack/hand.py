"""The bundled 26-DOF, 17-Gaussian hand model.

DOF layout: 3 global translations, 3 global rotations, then per finger (thumb,
index, middle, ring, pinky) abduction + flexion at the base joint and one
flexion at each of the two distal joints. Fingers point along +y of the palm
frame, positive flexion curls toward +z, lengths are in millimetres.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .io import load_model
from .kinematics import ModelGaussian, SkeletonModel


def default_hand_model() -> SkeletonModel:
    with resources.as_file(resources.files("sagtrack") / "data" / "hand26.json") as path:
        return load_model(path)


def with_uniform_color(model: SkeletonModel, hsv) -> SkeletonModel:
    """Same model with every Gaussian recolored (e.g. a single skin tone)."""
    gs = [ModelGaussian(g.bone, g.mean, g.covariance, np.asarray(hsv, float), g.weight) for g in model.gaussians]
    return model.replace(gaussians=gs)


def isotropic_counterpart(model: SkeletonModel, max_per_gaussian=3) -> SkeletonModel:
    """Sphere-only (SoG) approximation of an anisotropic model.

    Each Gaussian becomes a row of spheres along its longest axis: the count is
    the ratio of longest to the mean of the two shorter axes (capped), the
    radius is that mean, and the row spans the ellipsoid's length.
    """
    gs = []
    for g in model.gaussians:
        evals, evecs = np.linalg.eigh(g.covariance)
        radii = np.sqrt(evals)
        r = 0.5 * (radii[0] + radii[1])
        n = int(np.clip(np.round(radii[2] / r), 1, max_per_gaussian))
        axis = evecs[:, 2]
        span = radii[2] - r if n > 1 else 0.0
        offsets = np.linspace(-span, span, n) if n > 1 else [0.0]
        for o in offsets:
            gs.append(ModelGaussian(g.bone, g.mean + o * axis, r * r * np.eye(3), g.color, g.weight))
    return model.replace(gaussians=gs, name=model.name + "-sog")
