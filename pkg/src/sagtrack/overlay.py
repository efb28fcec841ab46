"""Static overlay figures: projected model Gaussians drawn as 1-sigma ellipses."""
from __future__ import annotations

import numpy as np
from matplotlib.colors import hsv_to_rgb
from PIL import Image, ImageDraw

from .errors import InvalidInputError


def ellipse_points(mean, cov, n=96, scale=1.0):
    """``n`` points on the ``scale``-sigma contour of a 2D Gaussian."""
    evals, evecs = np.linalg.eigh(np.asarray(cov, float))
    L = evecs * np.sqrt(np.clip(evals, 0.0, None))
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.asarray(mean, float) + scale * (np.stack([np.cos(t), np.sin(t)], -1) @ L.T)


def _canvas(base):
    if isinstance(base, Image.Image):
        return base.convert("RGB")
    if isinstance(base, tuple) and len(base) == 2:
        return Image.new("RGB", (int(base[0]), int(base[1])), (0, 0, 0))
    arr = np.asarray(base)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise InvalidInputError("overlay base must be an RGB array, a PIL image or a (width, height) canvas")
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(arr[..., :3], "RGB")


def render_overlay(base, gaussians, line_color=None, width=1):
    """The overlay as a PIL image. Ellipses use each Gaussian's own color unless ``line_color`` is given."""
    img = _canvas(base)
    draw = ImageDraw.Draw(img)
    for g in gaussians:
        pts = ellipse_points(g.mean, g.covariance)
        if line_color is None:
            rgb = hsv_to_rgb(np.clip(g.color, 0.0, 1.0))
            col = tuple(int(round(255 * c)) for c in rgb)
        else:
            col = tuple(line_color)
        # pixel i covers [i, i + 1); PIL truncates float coordinates to match
        xy = [(float(x), float(y)) for x, y in pts]
        draw.line(xy + xy[:1], fill=col, width=width)
        cx, cy = float(g.mean[0]), float(g.mean[1])
        draw.point((cx, cy), fill=col)
    return img


def emit_overlay(base, gaussians, path, line_color=None, width=1):
    """Draw 1-sigma ellipses over ``base`` and write the result (format from the file suffix)."""
    img = render_overlay(base, list(gaussians), line_color, width)
    img.save(path)
    return path
