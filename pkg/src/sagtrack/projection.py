"""Perspective projection of 3D Gaussians to 2D Gaussians.

A 3D Gaussian is treated as its 1-sigma ellipsoid. The tangent cone from the
camera centre to that ellipsoid is a symmetric 3x3 "cone matrix" M; intersecting
the cone with the image plane gives an ellipse, which becomes the 1-sigma
contour of the projected 2D Gaussian.

All array routines broadcast over leading axes so the energy code can project
every model Gaussian (and every DOF derivative) in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateViewError, InvalidInputError, NonEllipticProjectionError
from .gaussian import Gaussian2D, Gaussian3D, transform_gaussian3d

NEAR_PLANE = 1e-6


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera: x_pix ~ K (R X + t)."""

    K: np.ndarray
    R: np.ndarray = None
    t: np.ndarray = None
    image_size: tuple = (320, 240)

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        R = np.eye(3) if self.R is None else np.asarray(self.R, dtype=float)
        t = np.zeros(3) if self.t is None else np.asarray(self.t, dtype=float)
        if K.shape != (3, 3) or abs(K[1, 0]) + abs(K[2, 0]) + abs(K[2, 1]) > 0:
            raise InvalidInputError("K must be 3x3 upper-triangular")
        if K[2, 2] != 1.0 or K[0, 0] <= 0 or K[1, 1] <= 0:
            raise InvalidInputError("K must have K[2,2] = 1 and positive focal lengths")
        if R.shape != (3, 3) or np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
            raise InvalidInputError("R must be a proper rotation")
        if t.shape != (3,):
            raise InvalidInputError("t must be a 3-vector")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))

    @property
    def focal(self):
        return float(np.sqrt(self.K[0, 0] * self.K[1, 1]))

    @property
    def center(self):
        """Camera centre in world coordinates."""
        return -self.R.T @ self.t

    @property
    def P(self):
        return self.K @ np.hstack([self.R, self.t[:, None]])

    @classmethod
    def look_at(cls, eye, target, f, image_size=(320, 240), up=(0.0, 1.0, 0.0)):
        """Camera at ``eye`` looking at ``target`` (image y axis points down)."""
        eye = np.asarray(eye, dtype=float)
        z = np.asarray(target, dtype=float) - eye
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=float))
        if np.linalg.norm(x) < 1e-9:
            x = np.cross(z, [1.0, 0.0, 0.0])
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.vstack([x, y, z])
        w, h = image_size
        K = np.array([[f, 0.0, w / 2.0], [0.0, f, h / 2.0], [0.0, 0.0, 1.0]])
        return cls(K=K, R=R, t=-R @ eye, image_size=image_size)


@dataclass(frozen=True, eq=False)
class ProjectionJacobian:
    """Derivatives of a projected Gaussian; leading axes index DOFs."""

    dmu_p: np.ndarray
    dsigma_p: np.ndarray


# ---------------------------------------------------------------------------
# array kernels


def cone_matrices(mu, prec):
    """Cone matrices for means ``mu`` (..., 3) and inverse covariances ``prec`` (..., 3, 3).

    M = P mu mu^T P - (mu^T P mu - 1) P, with P = Sigma^{-1}.
    """
    v = np.einsum("...ij,...j->...i", prec, mu)
    d2 = np.einsum("...i,...i->...", mu, v)
    return v[..., :, None] * v[..., None, :] - (d2 - 1.0)[..., None, None] * prec


def cone_matrix_derivatives(mu, prec, dmu, dprec):
    """Total derivative of the cone matrix. Shapes broadcast: mu (...,3), dmu (...,3)."""
    v = np.einsum("...ij,...j->...i", prec, mu)
    d2 = np.einsum("...i,...i->...", mu, v)
    dv = np.einsum("...ij,...j->...i", dprec, mu) + np.einsum("...ij,...j->...i", prec, dmu)
    dd2 = 2.0 * np.einsum("...i,...i->...", dmu, v) + np.einsum("...i,...ij,...j->...", mu, dprec, mu)
    outer = dv[..., :, None] * v[..., None, :]
    return outer + np.swapaxes(outer, -1, -2) - dd2[..., None, None] * prec - (d2 - 1.0)[..., None, None] * dprec


def conic_to_gaussian(M, K):
    """Projected mean and covariance from cone matrices ``M`` (..., 3, 3).

    Returns ``(mu_p, sigma_p, elliptic)`` where ``elliptic`` flags entries whose
    conic is a proper ellipse. Non-elliptic entries hold garbage.

    The centre uses 2x2 minors, not signed cofactors: |M_31| removes row 3 and
    column 1, |M_23| removes row 2 and column 3.
    """
    m11, m12, m13 = M[..., 0, 0], M[..., 0, 1], M[..., 0, 2]
    m21, m22, m23 = M[..., 1, 0], M[..., 1, 1], M[..., 1, 2]
    m31, m32 = M[..., 2, 0], M[..., 2, 1]
    det_a = m11 * m22 - m12 * m21
    det_m = np.linalg.det(M)
    minor_31 = m12 * m23 - m13 * m22
    minor_23 = m11 * m32 - m12 * m31
    elliptic = (m11 < 0) & (det_a > 0) & (det_m > 0)
    safe = np.where(elliptic, det_a, 1.0)
    K2 = K[:2, :2]
    centre = np.stack([minor_31, -minor_23], axis=-1) / safe[..., None]
    mu_p = centre @ K2.T + K[:2, 2]
    a_inv = np.stack(
        [np.stack([m22, -m12], -1), np.stack([-m21, m11], -1)], -2
    ) / safe[..., None, None]
    sigma_n = -(det_m / safe)[..., None, None] * a_inv
    sigma_p = K2 @ sigma_n @ K2.T
    sigma_p = 0.5 * (sigma_p + np.swapaxes(sigma_p, -1, -2))
    return mu_p, sigma_p, elliptic


def conic_derivatives(M, dM, K):
    """Derivatives of projected mean/covariance given cone-matrix derivatives.

    With A the upper-left 2x2 block of M, b its last column and m33 the corner,
    the normalized centre is c = -A^{-1} b, the Schur complement is
    kappa = m33 + b.c and the normalized covariance is -kappa A^{-1}, so

        dc     = -A^{-1} (dA c + db)
        dkappa = dm33 + 2 c.db + c^T dA c
        dSigma = -dkappa A^{-1} + kappa A^{-1} dA A^{-1}

    ``M`` must broadcast against ``dM``.
    """
    A = M[..., :2, :2]
    b = M[..., :2, 2]
    a_inv = np.linalg.inv(A)
    c = -np.einsum("...ij,...j->...i", a_inv, b)
    kappa = M[..., 2, 2] + np.einsum("...i,...i->...", b, c)
    dA = dM[..., :2, :2]
    db = dM[..., :2, 2]
    dA_c = np.einsum("...ij,...j->...i", dA, c)
    dc = -np.einsum("...ij,...j->...i", a_inv, dA_c + db)
    dkappa = dM[..., 2, 2] + 2.0 * np.einsum("...i,...i->...", c, db) + np.einsum("...i,...i->...", c, dA_c)
    dsig_n = -dkappa[..., None, None] * a_inv + kappa[..., None, None] * (a_inv @ dA @ a_inv)
    K2 = K[:2, :2]
    dmu_p = dc @ K2.T
    dsigma_p = K2 @ dsig_n @ K2.T
    dsigma_p = 0.5 * (dsigma_p + np.swapaxes(dsigma_p, -1, -2))
    return dmu_p, dsigma_p


def to_camera(cam, mu, prec, dmu=None, dprec=None):
    """Express world means/precisions (and optional derivatives) in the camera frame."""
    R = cam.R
    mu_c = mu @ R.T + cam.t
    prec_c = R @ prec @ R.T
    if dmu is None:
        return mu_c, prec_c
    return mu_c, prec_c, dmu @ R.T, R @ dprec @ R.T


# ---------------------------------------------------------------------------
# single-Gaussian API


def _camera_frame_checks(mu, prec):
    d2 = float(mu @ prec @ mu)
    if d2 <= 1.0:
        raise DegenerateViewError("camera centre lies inside the 1-sigma ellipsoid")
    if mu[2] <= 0:
        raise NonEllipticProjectionError("Gaussian lies behind the camera")


def cone_matrix(mu_h, sigma_h):
    """Cone matrix of the 1-sigma ellipsoid (camera-frame mean and covariance)."""
    mu_h = np.asarray(mu_h, dtype=float)
    prec = np.linalg.inv(np.asarray(sigma_h, dtype=float))
    if float(mu_h @ prec @ mu_h) <= 1.0:
        raise DegenerateViewError("camera centre lies inside the 1-sigma ellipsoid")
    M = cone_matrices(mu_h, prec)
    return 0.5 * (M + M.T)


def project_gaussian(g: Gaussian3D, K) -> Gaussian2D:
    """Project a camera-frame Gaussian through intrinsics ``K`` (camera at origin)."""
    K = np.asarray(K, dtype=float)
    prec = np.linalg.inv(g.covariance)
    _camera_frame_checks(g.mean, prec)
    M = cone_matrices(g.mean, prec)
    mu_p, sigma_p, ok = conic_to_gaussian(M, K)
    if not ok:
        raise NonEllipticProjectionError("silhouette is not an ellipse")
    return Gaussian2D(mu_p, sigma_p, g.color, g.weight)


def project_gaussian_world(g: Gaussian3D, cam: CameraModel) -> Gaussian2D:
    return project_gaussian(transform_gaussian3d(g, cam.R, cam.t), cam.K)


def cone_matrix_partials(mu_h, sigma_h_inv):
    """Partial derivatives of M w.r.t. the mean and the unique inverse-covariance entries.

    Returns ``(dM_dmu, dM_dprec, index)``: ``dM_dmu[i]`` is dM/dmu_i (3 matrices),
    ``dM_dprec[k]`` is dM/dP_k for the six unique entries of P = Sigma^{-1}, whose
    (row, col) pairs are listed in ``index``. A unique entry P_k moves both
    symmetric positions, i.e. dP = S^k with S^k the structure matrix of ones.
    """
    mu = np.asarray(mu_h, dtype=float)
    P = np.asarray(sigma_h_inv, dtype=float)
    v = P @ mu
    d2 = mu @ v
    dM_dmu = np.empty((3, 3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        outer = P @ np.outer(e, mu) @ P
        dM_dmu[i] = outer + outer.T - 2.0 * v[i] * P
    index = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
    dM_dprec = np.empty((6, 3, 3))
    for k, (r, c) in enumerate(index):
        S = np.zeros((3, 3))
        S[r, c] = S[c, r] = 1.0
        H = S @ np.outer(mu, mu) @ P
        dM_dprec[k] = H + H.T - (mu @ S @ mu) * P - (d2 - 1.0) * S
    return dM_dmu, dM_dprec, index


def cone_matrix_derivative(mu_h, sigma_h_inv, dmu_h, dsigma_h_inv):
    """dM for a perturbation (dmu_h, dsigma_h_inv), assembled from the partials."""
    dM_dmu, dM_dprec, index = cone_matrix_partials(mu_h, sigma_h_inv)
    dmu_h = np.asarray(dmu_h, dtype=float)
    dP = np.asarray(dsigma_h_inv, dtype=float)
    dP_unique = np.array([dP[r, c] for r, c in index])
    dM = np.tensordot(dmu_h, dM_dmu, axes=(0, 0)) + np.tensordot(dP_unique, dM_dprec, axes=(0, 0))
    return 0.5 * (dM + dM.T)


def projection_derivative(M, dM, K) -> ProjectionJacobian:
    """Jacobian of the projected (mu_p, Sigma_p) for a cone-matrix change ``dM``.

    ``dM`` may carry leading DOF axes.
    """
    M = np.asarray(M, dtype=float)
    dM = np.asarray(dM, dtype=float)
    K = np.asarray(K, dtype=float)
    _, _, ok = conic_to_gaussian(M, K)
    if not ok:
        raise NonEllipticProjectionError("silhouette is not an ellipse")
    dmu_p, dsigma_p = conic_derivatives(M, dM, K)
    return ProjectionJacobian(dmu_p, dsigma_p)


# ---------------------------------------------------------------------------
# isotropic scaled-orthographic baseline


def isotropic_project(mu_c, sigma, K, dmu_c=None):
    """Scaled-orthographic projection of spheres given camera-frame centres.

    Returns ``(mu_p, sigma_p)`` (pixel centre and pixel standard deviation);
    with ``dmu_c`` (..., J, 3) also their derivatives.
    """
    z = mu_c[..., 2]
    xn = mu_c[..., :2] / z[..., None]
    K2 = K[:2, :2]
    mu_p = xn @ K2.T + K[:2, 2]
    f = np.sqrt(K[0, 0] * K[1, 1])
    sigma_p = f * sigma / z
    if dmu_c is None:
        return mu_p, sigma_p
    zz = z[..., None]
    dz = dmu_c[..., 2]
    dxn = (dmu_c[..., :2] - xn[..., None, :] * dz[..., None]) / zz[..., None]
    dmu_p = dxn @ K2.T
    dsigma_p = -sigma_p[..., None] * dz / zz
    return mu_p, sigma_p, dmu_p, dsigma_p


def project_isotropic_baseline(g: Gaussian3D, cam: CameraModel) -> Gaussian2D:
    """Baseline SoG projection: perspective centre, standard deviation f * sigma / depth.

    Underestimates the exact silhouette of a nearby sphere (f/sqrt(3) versus
    f/2 for a unit sphere at depth 2); kept for comparison runs only.
    """
    cov = g.covariance
    var = cov[0, 0]
    off = np.abs(cov - np.diag(np.diag(cov))).max()
    if off > 1e-9 * var or np.abs(np.diag(cov) - var).max() > 1e-9 * var:
        raise InvalidInputError("baseline projection requires an isotropic covariance")
    mu_c = cam.R @ g.mean + cam.t
    if mu_c[2] <= NEAR_PLANE:
        raise DegenerateViewError("Gaussian centre is on or behind the near plane")
    mu_p, sigma_p = isotropic_project(mu_c, np.sqrt(var), cam.K)
    K2 = cam.K[:2, :2]
    cov_p = (sigma_p / cam.focal) ** 2 * (K2 @ K2.T)
    return Gaussian2D(mu_p, cov_p, g.color, g.weight)
