"""Random instance generators shared by the tests."""
import numpy as np

from oracles import random_rotation, random_spd
from sagtrack.gaussian import Gaussian3D
from sagtrack.projection import CameraModel


def random_camera(rng, image_size=(320, 240)):
    f = rng.uniform(200, 800)
    K = np.array([[f * rng.uniform(0.9, 1.1), rng.uniform(-2, 2), rng.uniform(100, 220)],
                  [0.0, f, rng.uniform(80, 160)],
                  [0.0, 0.0, 1.0]])
    return CameraModel(K, random_rotation(rng), rng.normal(0, 5, 3), image_size)


def random_visible_gaussian(rng, cam, depth=(4.0, 40.0), eig=(0.05, 4.0)):
    """A world-frame Gaussian whose whole 1-sigma ellipsoid lies in front of ``cam``."""
    while True:
        z = rng.uniform(*depth)
        mu_c = np.array([rng.uniform(-0.4, 0.4) * z, rng.uniform(-0.4, 0.4) * z, z])
        S_c = random_spd(rng, 3, *eig)
        if mu_c[2] - np.sqrt(S_c[2, 2]) <= 0.2:
            continue
        mu = cam.R.T @ (mu_c - cam.t)
        S = cam.R.T @ S_c @ cam.R
        S = 0.5 * (S + S.T)
        return Gaussian3D(mu, S, rng.uniform(0, 1, 3))


def random_chain_model(rng, n_bones=5, gaussians_per_bone=2):
    """A random branching skeleton using every DOF type."""
    from sagtrack.kinematics import Bone, Dof, ModelGaussian, SkeletonModel

    bones = [Bone("root", -1, rng.normal(0, 5, 3), random_rotation(rng))]
    for b in range(1, n_bones):
        bones.append(Bone(f"b{b}", int(rng.integers(0, b)), rng.normal(0, 20, 3), random_rotation(rng)))
    dofs = [Dof("tx", 0, [1, 0, 0], "global-translation", -100, 100),
            Dof("ty", 0, [0, 1, 0], "global-translation", -100, 100),
            Dof("rz", 0, rng.normal(size=3), "revolute", -3, 3)]
    for b in range(1, n_bones):
        dofs.append(Dof(f"r{b}a", b, rng.normal(size=3), "revolute", -2, 2))
        dofs.append(Dof(f"r{b}b", b, rng.normal(size=3), "revolute", -2, 2))
        if b % 2:
            dofs.append(Dof(f"p{b}", b, rng.normal(size=3), "prismatic", -10, 10))
    gs = [ModelGaussian(b, rng.normal(0, 10, 3), random_spd(rng, 3, 1, 30), rng.uniform(0, 1, 3))
          for b in range(n_bones) for _ in range(gaussians_per_bone)]
    return SkeletonModel(bones, dofs, gs)


def random_energy_instance(rng, n_gaussians=3, n_cameras=2, n_image=20, anisotropic_image=False):
    """Small random (model, pose, cameras, image SoGs) problem with overlapping colors."""
    from sagtrack.image_model import ImageSoG
    from sagtrack.kinematics import Bone, Dof, ModelGaussian, SkeletonModel
    from sagtrack.projection import CameraModel, project_gaussian_world

    bones = [Bone("root", -1, [0, 0, 0])]
    for b in range(1, n_gaussians):
        bones.append(Bone(f"b{b}", b - 1, rng.normal(0, 8, 3), random_rotation(rng)))
    dofs = [Dof("tx", 0, [1, 0, 0], "global-translation", -50, 50),
            Dof("ty", 0, [0, 1, 0], "global-translation", -50, 50),
            Dof("tz", 0, [0, 0, 1], "global-translation", -50, 50),
            Dof("r0", 0, rng.normal(size=3), "revolute", -3, 3)]
    for b in range(1, n_gaussians):
        dofs.append(Dof(f"r{b}", b, rng.normal(size=3), "revolute", -2, 2))
        dofs.append(Dof(f"p{b}", b, rng.normal(size=3), "prismatic", -5, 5))
    colors = rng.uniform([0, 0.4, 0.4], [1, 0.9, 0.9], (n_gaussians, 3))
    gs = [ModelGaussian(b, rng.normal(0, 3, 3), random_spd(rng, 3, 4, 40), colors[b], rng.uniform(0.5, 1.5))
          for b in range(n_gaussians)]
    model = SkeletonModel(bones, dofs, gs)
    theta = rng.uniform(model.lower, model.upper) * 0.2
    cams = []
    for _ in range(n_cameras):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        cams.append(CameraModel.look_at(150.0 * d, np.zeros(3), 300.0))
    from sagtrack.kinematics import pose_model

    posed = pose_model(model, theta).gaussians()
    images = []
    for cam in cams:
        means, covs, cols = [], [], []
        for _ in range(n_image):
            k = rng.integers(n_gaussians)
            means.append(project_gaussian_world(posed[k], cam).mean + rng.normal(0, 8, 2))
            s = rng.uniform(2, 10)
            covs.append(random_spd(rng, 2, 4, 100) if anisotropic_image else s * s * np.eye(2))
            c = colors[k] + rng.normal(0, 0.03, 3)
            c[0] %= 1.0
            cols.append(np.clip(c, 0, 1))
        from sagtrack.image_model import precompute_self_overlap

        images.append(precompute_self_overlap(ImageSoG(np.array(means), np.array(covs), np.array(cols), (320, 240))))
    return model, theta, cams, images
