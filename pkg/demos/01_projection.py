"""Project one anisotropic Gaussian and compare it with the isotropic shortcut.

An elongated ellipsoid seen off-axis projects to a tilted ellipse. The
isotropic baseline replaces it by a sphere and can only produce circles.
Writes projection.png next to this script (or to the directory given as the
first argument).
"""
import sys
from pathlib import Path

import numpy as np

from sagtrack.gaussian import Gaussian3D
from sagtrack.overlay import emit_overlay
from sagtrack.projection import CameraModel, cone_matrix, project_gaussian_world, project_isotropic_baseline

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "out"
out.mkdir(parents=True, exist_ok=True)

K = np.array([[300.0, 0.0, 160.0], [0.0, 300.0, 120.0], [0.0, 0.0, 1.0]])
cam = CameraModel(K, image_size=(320, 240))

# a finger-like ellipsoid: long along x, tilted, 60 mm in front of the camera
c, s = np.cos(0.6), np.sin(0.6)
R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
finger = Gaussian3D([8.0, -5.0, 60.0], R @ np.diag([12.0, 2.0, 2.0]) ** 2 @ R.T, [0.05, 0.8, 0.9])

print("cone matrix at the camera:")
print(np.array2string(cone_matrix(finger.mean, finger.covariance), precision=4))
p = project_gaussian_world(finger, cam)
print("projected mean", p.mean.round(3))
print("projected covariance\n", p.covariance.round(3))
evals = np.linalg.eigvalsh(p.covariance)
print("axis ratio %.2f" % np.sqrt(evals[1] / evals[0]))

# the baseline needs a sphere: use the same volume
r = np.prod(np.sqrt(np.linalg.eigvalsh(finger.covariance))) ** (1 / 3)
ball = Gaussian3D(finger.mean, r * r * np.eye(3), [0.6, 0.8, 0.9])
b = project_isotropic_baseline(ball, cam)
print("isotropic baseline sigma %.3f px" % np.sqrt(b.covariance[0, 0]))

emit_overlay((320, 240), [p, b], out / "projection.png")
print("wrote", out / "projection.png")
