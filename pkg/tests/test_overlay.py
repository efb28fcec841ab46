import numpy as np
from PIL import Image

from sagtrack.gaussian import Gaussian2D, Gaussian3D
from sagtrack.overlay import ellipse_points, emit_overlay, render_overlay
from sagtrack.projection import project_gaussian


def test_empty_model_copies_input(tmp_path):
    base = np.random.default_rng(0).integers(0, 255, (40, 60, 3)).astype(np.uint8)
    emit_overlay(base, [], tmp_path / "o.png")
    assert np.array_equal(np.asarray(Image.open(tmp_path / "o.png")), base)


def test_sphere_circle_radius():
    f = 60.0
    K = np.array([[f, 0, 80], [0, f, 60], [0, 0, 1]])
    p = project_gaussian(Gaussian3D([0, 0, 2.0], np.eye(3), [0.0, 0.0, 1.0]), K)
    expected = f / np.sqrt(3)
    img = np.asarray(render_overlay((160, 120), [p], line_color=(255, 255, 255)))
    ys, xs = np.nonzero(img[..., 0])
    r = np.hypot(xs + 0.5 - 80, ys + 0.5 - 60)
    ring = r > 2
    assert np.abs(r[ring] - expected).max() <= 1.0


def test_ellipse_points_on_contour():
    cov = np.array([[4.0, 1.0], [1.0, 2.0]])
    pts = ellipse_points([3, 4], cov)
    d = pts - [3, 4]
    assert np.allclose(np.einsum("ni,ij,nj->n", d, np.linalg.inv(cov), d), 1.0)


def test_byte_identical(tmp_path):
    gs = [Gaussian2D([30, 20], [[40, 5], [5, 20]], [0.3, 0.8, 0.9]), Gaussian2D([10, 10], 9 * np.eye(2))]
    emit_overlay((64, 48), gs, tmp_path / "a.png")
    emit_overlay((64, 48), gs, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_unwritable_path(tmp_path):
    import pytest

    with pytest.raises(OSError):
        emit_overlay((10, 10), [], tmp_path / "missing" / "o.png")
