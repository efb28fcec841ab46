"""How much does each extra camera help, and what do anisotropic Gaussians buy?

Runs pose recovery on the same noisy synthetic frames using every subset of
2 to 5 cameras, then compares the anisotropic model with its sphere-only
counterpart. Plots both results to ablation.png.
"""
import itertools
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sagtrack.energy import EnergyConfig
from sagtrack.hand import default_hand_model, isotropic_counterpart
from sagtrack.kinematics import clamp_pose
from sagtrack.metrics import frame_errors
from sagtrack.synth import NoiseConfig, SyntheticScene, default_rig, random_pose, synth_render
from sagtrack.tracker import OptimizerConfig, optimize_pose

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "out"
out.mkdir(parents=True, exist_ok=True)
model, rig = default_hand_model(), default_rig()
rng = np.random.default_rng(7)


def start_from(truth):
    th = truth + np.where(model.revolute, np.radians(5), 0.0) * rng.uniform(-1, 1, model.n_dofs)
    th[~model.revolute] += rng.uniform(-5, 5, 3)
    return clamp_pose(model, th)


cases = []
for t in range(4):
    truth = random_pose(model, rng)
    imgs = synth_render(SyntheticScene(model, [truth], rig, NoiseConfig(mean_jitter_px=1.0), isotropic=False, seed=t), 0)
    cases.append((truth, imgs, start_from(truth)))

counts, means, ses = [], [], []
for k in range(2, 6):
    errs = []
    for sub in itertools.combinations(range(5), k):
        for truth, imgs, start in cases:
            res = optimize_pose(start, model, [imgs[i] for i in sub], OptimizerConfig(), EnergyConfig([rig[i] for i in sub]))
            errs.append(frame_errors([res.pose], [truth], model)[0])
    counts.append(k)
    means.append(np.mean(errs))
    ses.append(np.std(errs, ddof=1) / np.sqrt(len(errs)))
    print(f"{k} cameras: {means[-1]:.2f} +- {ses[-1]:.2f} mm over {len(errs)} runs")

sog = isotropic_counterpart(model)
sag_err, sog_err = [], []
for t in range(6):
    truth = random_pose(model, rng)
    imgs = synth_render(SyntheticScene(model, [truth], rig, seed=100 + t), 0)
    start = start_from(truth)
    a = optimize_pose(start, model, imgs, OptimizerConfig(), EnergyConfig(rig))
    b = optimize_pose(start, sog, imgs, OptimizerConfig(), EnergyConfig(rig, projection="isotropic"))
    sag_err.append(frame_errors([a.pose], [truth], model)[0])
    sog_err.append(frame_errors([b.pose], [truth], sog)[0])
print(f"anisotropic model {np.mean(sag_err):.2f} mm, sphere-only model ({len(sog.gaussians)} spheres) "
      f"{np.mean(sog_err):.2f} mm")

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
ax1.errorbar(counts, means, yerr=ses, marker="o", capsize=3)
ax1.set_xlabel("cameras")
ax1.set_ylabel("mean landmark error (mm)")
ax1.set_xticks(counts)
ax2.bar(["anisotropic", "spheres"], [np.mean(sag_err), np.mean(sog_err)], color=["tab:blue", "tab:gray"])
ax2.set_ylabel("mean landmark error (mm)")
fig.tight_layout()
fig.savefig(out / "ablation.png", dpi=100)
print("wrote", out / "ablation.png")
