"""Throughput of one tracking frame at realistic problem size."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .energy import EnergyConfig, EnergyProblem
from .hand import default_hand_model
from .image_model import ImageSoG, precompute_self_overlap
from .kinematics import clamp_pose
from .synth import SyntheticScene, default_rig, random_pose, synth_render
from .tracker import OptimizerConfig, optimize_pose

TARGET_MS = 40.0


@dataclass(frozen=True)
class BenchReport:
    cameras: int
    model_gaussians: int
    image_gaussians: int        # per camera
    iterations: int
    repeats: int
    ms_per_frame: float         # median over repeats
    ms_per_evaluation: float
    evaluations: float          # mean energy evaluations per frame

    @property
    def meets_target(self):
        return self.ms_per_frame <= TARGET_MS

    def format(self):
        return "\n".join([
            f"cameras={self.cameras}",
            f"model_gaussians={self.model_gaussians}",
            f"image_gaussians_per_camera={self.image_gaussians}",
            f"iterations={self.iterations}",
            f"repeats={self.repeats}",
            f"ms_per_frame={self.ms_per_frame:.3f}",
            f"ms_per_evaluation={self.ms_per_evaluation:.3f}",
            f"evaluations_per_frame={self.evaluations:.1f}",
            f"target_ms={TARGET_MS:g}",
            f"meets_target={int(self.meets_target)}",
        ]) + "\n"


def _pad(sog: ImageSoG, n, rng, palette, size):
    """Add clutter Gaussians (colors near the model's) until the set holds ``n`` entries."""
    extra = max(n - len(sog), 0)
    w, h = size
    means = np.concatenate([sog.means, rng.uniform((0, 0), (w, h), (extra, 2))])
    sig = rng.uniform(1.0, 8.0, extra)
    covs = np.concatenate([sog.covariances, sig[:, None, None] ** 2 * np.eye(2)])
    cols = palette[rng.integers(0, len(palette), extra)] + rng.normal(0.0, 0.03, (extra, 3))
    cols[:, 0] %= 1.0
    cols[:, 1:] = np.clip(cols[:, 1:], 0.0, 1.0)
    out = ImageSoG(means, covs, np.concatenate([sog.colors, cols]), sog.source_size)
    return precompute_self_overlap(out)


def bench_frame(image_gaussians=500, cameras=5, iterations=10, repeats=5, seed=0,
                direction="trust-lp") -> BenchReport:
    """Time optimize_pose on one synthetic frame padded to ``image_gaussians`` per camera."""
    rng = np.random.default_rng(seed)
    model = default_hand_model()
    cams = default_rig(cameras)
    truth = random_pose(model, rng)
    images = synth_render(SyntheticScene(model, [truth], cams, isotropic=True), 0)
    images = [_pad(img, image_gaussians, rng, model.colors, cam.image_size) for img, cam in zip(images, cams)]
    start = truth.copy()
    start[model.revolute] += rng.uniform(-1, 1, model.revolute.sum()) * np.deg2rad(5.0)
    start = clamp_pose(model, start)
    ecfg = EnergyConfig(cams)
    ocfg = OptimizerConfig(iterations=iterations, direction=direction)
    frame_ms, evals = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        problem = EnergyProblem(model, images, ecfg)
        res = optimize_pose(start, model, images, ocfg, problem=problem)
        frame_ms.append(1e3 * (time.perf_counter() - t0))
        evals.append(res.evaluations)
    problem = EnergyProblem(model, images, ecfg)
    t0 = time.perf_counter()
    for _ in range(repeats):
        problem.evaluate(start)
    eval_ms = 1e3 * (time.perf_counter() - t0) / repeats
    return BenchReport(cameras, len(model.gaussians), image_gaussians, iterations, repeats,
                       float(np.median(frame_ms)), eval_ms, float(np.mean(evals)))
