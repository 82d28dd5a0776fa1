"""AAD heatmap overlays with a shared, percentile-capped colour scale."""

from pathlib import Path

import numpy as np
from matplotlib import colormaps
from PIL import Image, ImageDraw

from . import io
from .errors import InvalidDimensionError
from .geometry import as_image

LEGEND_HEIGHT = 24
MAPS = (("aad", "d"), ("aad_h", "d_row"), ("aad_v", "d_col"))


def color_scale(d, percentile=99.0):
    """Upper end of the colour scale: the given percentile of ``d``."""
    return float(np.percentile(d, percentile))


def colorize(values, vmax, colormap="viridis"):
    """(H, W) values -> (H, W, 3) RGB in [0, 1]; 0 maps to the lowest colour."""
    t = np.zeros_like(values) if vmax <= 0 else np.clip(values / vmax, 0.0, 1.0)
    return colormaps[colormap](t)[..., :3]


def overlay(background, values, vmax, alpha=0.6, colormap="viridis"):
    bg = as_image(background).data
    if bg.shape[:2] != values.shape:
        raise InvalidDimensionError(f"map {values.shape} vs background {bg.shape[:2]}")
    if bg.shape[2] == 1:
        bg = np.repeat(bg, 3, axis=2)
    return (1.0 - alpha) * bg + alpha * colorize(values, vmax, colormap)


def legend_strip(width, vmax, colormap="viridis", label=""):
    """Gradient bar from 0 to ``vmax`` with the numeric range printed on it."""
    ramp = np.linspace(0.0, 1.0, width)[None, :].repeat(LEGEND_HEIGHT, axis=0)
    rgb = colormaps[colormap](ramp)[..., :3]
    im = Image.fromarray(io.to_uint8(rgb))
    draw = ImageDraw.Draw(im)
    draw.text((3, 6), "0", fill=(255, 255, 255))
    hi = f"{label} p99={vmax:.3g}px".strip()
    draw.text((max(3, width - 6 * len(hi) - 3), 6), hi, fill=(0, 0, 0))
    return np.asarray(im, dtype=np.float64) / 255.0


def render_heatmaps(result, background, out_dir, alpha=0.6, colormap="viridis", percentile=99.0, prefix=""):
    """Write ``aad.png``, ``aad_h.png`` and ``aad_v.png`` under ``out_dir``.

    All three share the scale capped at the ``percentile`` of ``d``.  Returns
    ``{"vmax": ..., "paths": [...]}``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vmax = color_scale(result.d, percentile)
    paths = []
    for name, attr in MAPS:
        body = overlay(background, getattr(result, attr), vmax, alpha, colormap)
        strip = legend_strip(body.shape[1], vmax, colormap, name.upper())
        path = out_dir / f"{prefix}{name}.png"
        io.write_image(path, np.concatenate([body, strip], axis=0))
        paths.append(str(path))
    return {"vmax": vmax, "paths": paths}
