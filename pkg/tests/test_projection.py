import numpy as np
import pytest

from helpers import random_camera, random_visible_gaussian
from oracles import (central_difference, conic_mismatch, directional_difference, dual_quadric_conic, gaussian_conic,
                     pinhole, relative_error, silhouette_rim)
from sagtrack.errors import DegenerateViewError, InvalidInputError, NonEllipticProjectionError
from sagtrack.gaussian import Gaussian3D
from sagtrack.projection import (CameraModel, cone_matrices, cone_matrix, cone_matrix_derivative,
                                 cone_matrix_derivatives, cone_matrix_partials, conic_to_gaussian,
                                 project_gaussian, project_gaussian_world, project_isotropic_baseline,
                                 projection_derivative)

SPHERE = Gaussian3D([0, 0, 2], np.eye(3))


def test_cone_matrix_sphere():
    M = cone_matrix([0, 0, 2], np.eye(3))
    assert np.allclose(M, np.diag([-3.0, -3.0, 1.0]), atol=1e-15)


def test_cone_matrix_symmetric(rng):
    cam = random_camera(rng)
    for _ in range(50):
        g = random_visible_gaussian(rng, cam)
        M = cone_matrix(cam.R @ g.mean + cam.t, cam.R @ g.covariance @ cam.R.T)
        assert np.abs(M - M.T).max() <= 1e-12 * np.abs(M).max()


def test_camera_inside_ellipsoid_rejected():
    with pytest.raises(DegenerateViewError):
        cone_matrix([0, 0, 0.5], np.eye(3))
    with pytest.raises(DegenerateViewError):
        project_gaussian(Gaussian3D([0, 0, 0.5], np.eye(3)), np.eye(3))


def test_non_elliptic_rejected():
    straddling = Gaussian3D([3, 0, 0.1], np.diag([1.0, 1.0, 0.25]))
    behind = Gaussian3D([0, 0, -3.0], np.eye(3))
    for h in (straddling, behind):
        with pytest.raises(NonEllipticProjectionError):
            project_gaussian(h, np.eye(3))
    # wide but thin in depth and wholly in front: still an ellipse
    p = project_gaussian(Gaussian3D([0, 0, 0.5], np.diag([9.0, 0.01, 0.04])), np.eye(3))
    assert np.all(np.linalg.eigvalsh(p.covariance) > 0)


def test_sphere_at_depth_two():
    p = project_gaussian(SPHERE, np.eye(3))
    assert np.abs(p.mean).max() <= 1e-15
    assert np.abs(p.covariance - np.diag([1 / 3, 1 / 3])).max() <= 1e-12


def test_sphere_with_intrinsics():
    f = 500.0
    K = np.array([[f, 0, 160], [0, f, 120], [0, 0, 1.0]])
    p = project_gaussian(SPHERE, K)
    assert np.allclose(p.mean, [160, 120], atol=1e-12)
    assert np.allclose(p.covariance, f * f / 3 * np.eye(2), rtol=1e-12)


def test_sphere_radius_matches_tangent_cone():
    # half-angle asin(r/d); silhouette radius on the unit image plane tan(asin(r/d))
    for r, d in ((1.0, 2.0), (2.0, 10.0), (0.5, 0.8)):
        p = project_gaussian(Gaussian3D([0, 0, d], r * r * np.eye(3)), np.eye(3))
        want = np.tan(np.arcsin(r / d)) ** 2
        assert np.allclose(np.diag(p.covariance), want, rtol=1e-12)


def test_color_and_weight_carried():
    g = Gaussian3D([0.1, 0.2, 3.0], np.diag([0.2, 0.3, 0.1]), [0.4, 0.5, 0.6], 0.7)
    p = project_gaussian(g, np.eye(3))
    assert np.array_equal(p.color, g.color) and p.weight == 0.7


def test_world_projection_identity_camera():
    cam = CameraModel(np.eye(3))
    g = Gaussian3D([0.3, -0.2, 4.0], np.diag([0.5, 0.2, 0.3]))
    a, b = project_gaussian_world(g, cam), project_gaussian(g, np.eye(3))
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.covariance, b.covariance)
    moved = project_gaussian_world(Gaussian3D([0, 0, 0], np.eye(3)), CameraModel(np.eye(3), t=[0, 0, 2.0]))
    assert np.allclose(moved.covariance, np.eye(2) / 3, atol=1e-12)


def test_dual_quadric_oracle(rng):
    worst = 0.0
    for _ in range(300):
        cam = random_camera(rng)
        g = random_visible_gaussian(rng, cam)
        p = project_gaussian_world(g, cam)
        worst = max(worst, conic_mismatch(gaussian_conic(p.mean, p.covariance),
                                          dual_quadric_conic(g.mean, g.covariance, cam.P)))
    assert worst < 1e-9


def test_silhouette_rim_lies_on_projected_ellipse(rng):
    for _ in range(100):
        cam = random_camera(rng)
        g = random_visible_gaussian(rng, cam)
        mu_c = cam.R @ g.mean + cam.t
        S_c = cam.R @ g.covariance @ cam.R.T
        rim = pinhole(silhouette_rim(mu_c, S_c), cam.K)
        p = project_gaussian_world(g, cam)
        d = rim - p.mean
        m = np.einsum("ni,ij,nj->n", d, np.linalg.inv(p.covariance), d)
        assert np.abs(m - 1.0).max() < 1e-8


def test_projected_covariance_positive_definite(rng):
    cams = [random_camera(rng) for _ in range(20)]
    mus, precs, Ks = [], [], []
    for cam in cams:
        for _ in range(500):
            g = random_visible_gaussian(rng, cam)
            mus.append(cam.R @ g.mean + cam.t)
            precs.append(np.linalg.inv(cam.R @ g.covariance @ cam.R.T))
            Ks.append(cam.K)
    mus, precs = np.array(mus), np.array(precs)
    for i, K in enumerate(Ks[::500]):
        sl = slice(500 * i, 500 * (i + 1))
        _, cov, ok = conic_to_gaussian(cone_matrices(mus[sl], precs[sl]), K)
        assert ok.all()
        assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_rotation_about_optical_axis(rng):
    K = np.array([[400.0, 0, 160], [0, 400, 120], [0, 0, 1]])
    cam = CameraModel(K)
    for _ in range(20):
        g = random_visible_gaussian(rng, cam)
        a = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(a), np.sin(a)
        Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        base = project_gaussian_world(g, cam)
        rot = project_gaussian_world(g, CameraModel(K, Rz))
        R2 = Rz[:2, :2]
        pp = K[:2, 2]
        assert np.allclose(rot.mean - pp, R2 @ (base.mean - pp), rtol=1e-9, atol=1e-9)
        assert np.allclose(rot.covariance, R2 @ base.covariance @ R2.T, rtol=1e-9, atol=1e-9 * base.covariance.max())


def test_minor_convention_for_mean():
    # mu_p equals the conic centre -A^-1 b whatever sign convention is used for the minors
    rng = np.random.default_rng(3)
    cam = CameraModel(np.eye(3))
    g = random_visible_gaussian(rng, cam)
    M = cone_matrix(g.mean, g.covariance)
    centre = -np.linalg.solve(M[:2, :2], M[:2, 2])
    p = project_gaussian(g, np.eye(3))
    assert np.allclose(p.mean, centre, rtol=1e-12)


# --- derivatives --------------------------------------------------------------


def _sym(rng):
    A = rng.normal(size=(3, 3))
    return A + A.T


def test_cone_derivative_zero():
    dM = cone_matrix_derivative([0, 0, 2.0], np.eye(3), np.zeros(3), np.zeros((3, 3)))
    assert np.array_equal(dM, np.zeros((3, 3)))


def test_cone_derivative_depth_example():
    dM = cone_matrix_derivative([0, 0, 2.0], np.eye(3), [0, 0, 1.0], np.zeros((3, 3)))
    assert np.allclose(dM, np.diag([-4.0, -4.0, 0.0]), atol=1e-14)
    fd = directional_difference(lambda x: cone_matrices(x, np.eye(3)), np.array([0, 0, 2.0]), np.array([0, 0, 1.0]))
    assert relative_error(dM, fd) < 1e-6


def test_cone_derivative_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(1000):
        mu = rng.normal(0, 1, 3) + [0, 0, 8]
        P = np.linalg.inv(np.diag(rng.uniform(0.1, 3, 3)))
        dmu, dP = rng.normal(size=3), _sym(rng) * 0.1

        def f(t):
            return cone_matrices(mu + t * dmu, P + t * dP)

        fd = directional_difference(f, 0.0, 1.0)
        worst = max(worst, relative_error(cone_matrix_derivative(mu, P, dmu, dP), fd))
    assert worst < 1e-6


def test_cone_partials_structure():
    mu = np.array([0.2, -0.1, 3.0])
    P = np.linalg.inv(np.diag([0.5, 0.7, 0.2]))
    dmu, dprec, index = cone_matrix_partials(mu, P)
    assert dmu.shape == (3, 3, 3) and dprec.shape == (6, 3, 3) and len(index) == 6
    for k, (r, c) in enumerate(index):
        S = np.zeros((3, 3))
        S[r, c] = S[c, r] = 1.0
        fd = directional_difference(lambda t: cone_matrices(mu, P + t * S), 0.0, 1.0)
        assert relative_error(dprec[k], fd) < 1e-6
    # the batched kernel agrees with the partials
    dP = _sym(np.random.default_rng(0))
    a = cone_matrix_derivative(mu, P, [1.0, 2.0, 3.0], dP)
    b = cone_matrix_derivatives(mu, P, np.array([1.0, 2.0, 3.0]), dP)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_projection_derivative_zero():
    M = cone_matrix([0, 0, 2.0], np.eye(3))
    J = projection_derivative(M, np.zeros((3, 3)), np.eye(3))
    assert np.array_equal(J.dmu_p, np.zeros(2)) and np.array_equal(J.dsigma_p, np.zeros((2, 2)))


def _projected(mu, S, K):
    mu_p, cov, _ = conic_to_gaussian(cone_matrices(mu, np.linalg.inv(S)), K)
    return np.concatenate([mu_p, cov.ravel()])


def test_projection_derivative_depth():
    K = np.diag([500.0, 500.0, 1.0])
    mu = np.array([0, 0, 2.0])
    dM = cone_matrix_derivative(mu, np.eye(3), [0, 0, 1.0], np.zeros((3, 3)))
    J = projection_derivative(cone_matrix(mu, np.eye(3)), dM, K)
    fd = directional_difference(lambda x: _projected(x, np.eye(3), K), mu, np.array([0, 0, 1.0]))
    assert relative_error(np.concatenate([J.dmu_p, J.dsigma_p.ravel()]), fd) < 1e-6


def test_projection_derivative_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(1000):
        cam = random_camera(rng)
        g = random_visible_gaussian(rng, cam)
        mu = cam.R @ g.mean + cam.t
        S = cam.R @ g.covariance @ cam.R.T
        P = np.linalg.inv(S)
        dmu, dP = rng.normal(size=3), 0.05 * _sym(rng) * np.abs(P).max()

        def f(t):
            mu_p, cov, _ = conic_to_gaussian(cone_matrices(mu + t * dmu, P + t * dP), cam.K)
            return np.concatenate([mu_p, cov.ravel()])

        fd = directional_difference(f, 0.0, 1.0, h=1e-5)
        J = projection_derivative(cone_matrices(mu, P), cone_matrix_derivative(mu, P, dmu, dP), cam.K)
        assert np.allclose(J.dsigma_p, J.dsigma_p.T)
        worst = max(worst, relative_error(np.concatenate([J.dmu_p, J.dsigma_p.ravel()]), fd))
    assert worst < 1e-5


# --- isotropic baseline -------------------------------------------------------


def test_baseline_examples():
    p = project_isotropic_baseline(SPHERE, CameraModel(np.eye(3)))
    assert np.allclose(p.covariance, 0.25 * np.eye(2), rtol=1e-14)
    exact = project_gaussian(SPHERE, np.eye(3))
    assert np.sqrt(exact.covariance[0, 0]) == pytest.approx(1 / np.sqrt(3), rel=1e-12)
    assert np.sqrt(p.covariance[0, 0]) < np.sqrt(exact.covariance[0, 0])
    K = np.array([[300.0, 0, 160], [0, 300, 120], [0, 0, 1]])
    on_axis = project_isotropic_baseline(Gaussian3D([0, 0, 7.0], 4 * np.eye(3)), CameraModel(K))
    assert np.allclose(on_axis.mean, [160, 120])
    assert np.sqrt(on_axis.covariance[0, 0]) == pytest.approx(300 * 2 / 7, rel=1e-14)


def test_baseline_errors():
    with pytest.raises(InvalidInputError):
        project_isotropic_baseline(Gaussian3D([0, 0, 2.0], np.diag([1.0, 2, 1])), CameraModel(np.eye(3)))
    with pytest.raises(DegenerateViewError):
        project_isotropic_baseline(Gaussian3D([0, 0, -1.0], np.eye(3)), CameraModel(np.eye(3)))


def test_camera_validation():
    with pytest.raises(InvalidInputError):
        CameraModel(np.array([[1.0, 0, 0], [1, 1, 0], [0, 0, 1]]))
    with pytest.raises(InvalidInputError):
        CameraModel(np.diag([1.0, 1, 2]))
    with pytest.raises(InvalidInputError):
        CameraModel(np.eye(3), R=np.diag([1.0, 1, -1]))


def test_look_at_centres_target():
    cam = CameraModel.look_at([100.0, 50, 300], [0.0, 10, 0], 400.0)
    g = Gaussian3D([0.0, 10, 0], np.eye(3))
    assert np.allclose(project_gaussian_world(g, cam).mean, [160, 120], atol=1e-9)
    assert np.allclose(cam.center, [100, 50, 300])
