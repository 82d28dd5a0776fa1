"""Fixture builders shared by the test modules."""

import numpy as np
from scipy import ndimage

from warpmetrics.geometry import Grid2D, ImageBuffer, check_mesh, make_uniform_uv_grid


def random_mesh(rng, h=None, w=None, width=None, height=None, jitter=0.15, smooth=True):
    """A valid (convex-celled) pixel mesh: uniform grid plus a smooth bend and
    per-node jitter bounded by ``jitter`` of the cell spacing."""
    h = h or int(rng.integers(3, 10))
    w = w or int(rng.integers(3, 10))
    width = width or float(rng.uniform(50, 500))
    height = height or float(rng.uniform(50, 500))
    uv = make_uniform_uv_grid(h, w).points
    pts = uv * [width, height] + rng.uniform(-100, 100, 2)
    sx, sy = width / (w - 1), height / (h - 1)
    for _ in range(100):
        p = pts.copy()
        if smooth:
            a = rng.uniform(-0.2, 0.2, 2)
            p[..., 0] += a[0] * sx * np.sin(np.pi * uv[..., 1] * rng.uniform(0.5, 2))
            p[..., 1] += a[1] * sy * np.sin(np.pi * uv[..., 0] * rng.uniform(0.5, 2))
        p += rng.uniform(-jitter, jitter, p.shape) * [sx, sy]
        try:
            check_mesh(p)
            return Grid2D(p)
        except ValueError:
            continue
    raise RuntimeError("could not draw a valid mesh")


def textured_image(rng, shape=(64, 64), sigma=1.5, color=False):
    a = ndimage.gaussian_filter(rng.random(shape + ((3,) if color else ())),
                                (sigma, sigma, 0) if color else sigma)
    a = (a - a.min()) / (a.max() - a.min())
    return ImageBuffer(a)
