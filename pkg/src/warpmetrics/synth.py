"""Synthetic disturbances with exact ground-truth flow.

Three cumulative settings mirror a robustness protocol: ``Set1`` applies only
a geometric warp, ``Set2`` adds per-channel colour jitter, ``Set3`` adds one
soft elliptical shadow on top.  Within a corpus the warp *shape* is fixed by
the master seed and only its amplitude is swept, so ground-truth metrics grow
monotonically with the sample index.  Photometric draws come from per-sample
seeds that are identical across the three sets.
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .flow import FlowField
from .geometry import ImageBuffer, as_image, sample_image
from .warps import WarpSpec, expand_warp

SETS = ("Set1", "Set2", "Set3")


@dataclass(frozen=True)
class DisturbanceSetting:
    set_id: str = "Set1"
    warp_kind: str = "sinusoidal"
    amplitude_start: float = 0.5
    amplitude_stop: float = 10.0
    color_strength: float = 0.0
    shadow_min_factor: tuple = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.set_id not in SETS:
            raise ParameterError(f"set_id must be one of {SETS}")
        if not 0.0 <= self.color_strength <= 1.0:
            raise ParameterError("color_strength must be in [0, 1]")
        lo, hi = self.shadow_min_factor
        if not 0.4 <= lo <= hi <= 1.0:
            raise ParameterError("shadow factors must satisfy 0.4 <= low <= high <= 1")
        object.__setattr__(self, "shadow_min_factor", (float(lo), float(hi)))

    @classmethod
    def preset(cls, set_id, seed=0, **overrides):
        """Default parameters of one of the three cumulative sets."""
        kw = {"set_id": set_id, "seed": seed}
        if set_id in ("Set2", "Set3"):
            kw["color_strength"] = 1.0
        if set_id == "Set3":
            kw["shadow_min_factor"] = (0.4, 0.7)
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self):
        d = asdict(self)
        d["shadow_min_factor"] = list(self.shadow_min_factor)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["shadow_min_factor"] = tuple(d.get("shadow_min_factor", (1.0, 1.0)))
        return cls(**d)


class CorpusSample(NamedTuple):
    image: ImageBuffer
    flow: FlowField
    provenance: dict


def sample_seed(master, index):
    """Independent per-sample seed; stable across sets and process layouts."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# geometric
# ---------------------------------------------------------------------------


def apply_warp(I, spec):
    """Backward-sample ``I`` through ``spec``; returns ``(warped, gt_flow)``."""
    I = as_image(I)
    H, W = I.shape
    disp = expand_warp(spec, (H, W))
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    if spec.kind == "identity":
        return I, FlowField.zeros((H, W))
    px, py = disp.inverse(xx, yy)
    warped = ImageBuffer(sample_image(I, px, py), id=I.id)
    vx, vy = disp(xx, yy)
    return warped, FlowField(vx, vy)


def place_page(page, canvas_shape, angle=0.0, coverage=0.5, background=0.25, center=None):
    """Put ``page`` on a flat background, rotated by ``angle`` degrees and scaled
    to occupy ``coverage`` of the canvas.

    Returns ``(canvas, spec)`` where ``spec`` is a rotation-kind warp mapping
    page pixels to canvas pixels (translation is relative to the page centre).
    """
    page = as_image(page)
    Hc, Wc = canvas_shape
    Hp, Wp = page.shape
    scale = float(np.sqrt(coverage * Hc * Wc / (Hp * Wp)))
    if center is None:
        center = ((Wc - 1) / 2.0, (Hc - 1) / 2.0)
    page_center = ((Wp - 1) / 2.0, (Hp - 1) / 2.0)
    spec = WarpSpec(kind="rotation", angle=angle, scale=scale,
                    translation=(center[0] - page_center[0], center[1] - page_center[1]))
    disp = expand_warp(spec, (Hp, Wp))
    yy, xx = np.mgrid[0:Hc, 0:Wc].astype(np.float64)
    px, py = disp.inverse(xx, yy)
    inside = (px >= -0.5) & (px <= Wp - 0.5) & (py >= -0.5) & (py <= Hp - 0.5)
    vals = sample_image(page, px, py)
    bg = np.broadcast_to(np.asarray(background, dtype=np.float64), (page.channels,))
    out = np.where(inside[..., None], vals, bg)
    return ImageBuffer(out, id=page.id), spec


# ---------------------------------------------------------------------------
# photometric
# ---------------------------------------------------------------------------


def color_params(setting, seed, channels=3):
    rng = np.random.default_rng([int(seed), 1])
    gain = 1.0 + setting.color_strength * rng.uniform(-0.2, 0.2, channels)
    bias = setting.color_strength * rng.uniform(-0.1, 0.1, channels)
    return gain, bias


def apply_color_disturbance(I, setting, seed):
    """Per-channel affine jitter, gain in [0.8, 1.2] and bias in [-0.1, 0.1]
    at full strength, clamped to [0, 1]."""
    I = as_image(I)
    if setting.color_strength == 0:
        return I
    gain, bias = color_params(setting, seed, I.channels)
    return I.with_data(np.clip(I.data * gain + bias, 0.0, 1.0))


def shadow_params(setting, seed, shape):
    rng = np.random.default_rng([int(seed), 2])
    H, W = shape
    lo, hi = setting.shadow_min_factor
    return {
        "factor": float(rng.uniform(lo, hi)),
        "center": [float(rng.uniform(0, W - 1)), float(rng.uniform(0, H - 1))],
        "radii": [float(rng.uniform(0.2, 0.6) * W), float(rng.uniform(0.2, 0.6) * H)],
        "angle": float(rng.uniform(0, np.pi)),
        "softness": 0.25,
    }


def shadow_field(shape, params):
    """Multiplicative luminance field: ``factor`` inside the ellipse rising
    smoothly to 1 outside it."""
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    cx, cy = params["center"]
    a, b = params["radii"]
    c, s = np.cos(params["angle"]), np.sin(params["angle"])
    dx, dy = xx - cx, yy - cy
    r = np.hypot((c * dx + s * dy) / a, (-s * dx + c * dy) / b)
    inside = 1.0 / (1.0 + np.exp((r - 1.0) / params["softness"]))
    return 1.0 - (1.0 - params["factor"]) * inside


def apply_shadow(I, setting, seed):
    I = as_image(I)
    lo, hi = setting.shadow_min_factor
    if lo == 1.0 and hi == 1.0:
        return I
    field_ = shadow_field(I.shape, shadow_params(setting, seed, I.shape))
    return I.with_data(np.clip(I.data * field_[..., None], 0.0, 1.0))


def disturb(I, setting, seed):
    """All photometric effects of ``setting``, in set order."""
    out = I
    if setting.set_id in ("Set2", "Set3"):
        out = apply_color_disturbance(out, setting, seed)
    if setting.set_id == "Set3":
        out = apply_shadow(out, setting, seed)
    return out


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------


def amplitude_schedule(setting, count):
    if count == 1:
        return np.array([setting.amplitude_start])
    return np.linspace(setting.amplitude_start, setting.amplitude_stop, count)


def corpus_warp(setting, amplitude):
    if setting.warp_kind == "identity":
        return WarpSpec()
    return WarpSpec(kind=setting.warp_kind, amplitude=float(amplitude), seed=int(setting.seed))


def make_sample(base, setting, index, count):
    """Sample ``index`` of a ``count``-long corpus; independent of every other sample."""
    base = as_image(base)
    amp = amplitude_schedule(setting, count)[index]
    spec = corpus_warp(setting, amp)
    seed = sample_seed(setting.seed, index)
    warped, flow = apply_warp(base, spec)
    image = disturb(warped, setting, seed)
    prov = {
        "index": int(index),
        "set": setting.set_id,
        "amplitude": float(amp),
        "warp": spec.to_dict(),
        "master_seed": int(setting.seed),
        "sample_seed": seed,
    }
    if setting.set_id in ("Set2", "Set3") and setting.color_strength > 0:
        gain, bias = color_params(setting, seed, base.channels)
        prov["color"] = {"gain": gain.tolist(), "bias": bias.tolist()}
    if setting.set_id == "Set3":
        prov["shadow"] = shadow_params(setting, seed, base.shape)
    return CorpusSample(ImageBuffer(image.data, id=f"{index:04d}"), flow, prov)


def make_robustness_corpus(base, setting, count):
    if count < 1:
        raise ParameterError("count must be >= 1")
    return [make_sample(base, setting, i, count) for i in range(count)]


def write_corpus(root, base, setting, samples):
    """Write ``root/<set>/<index>.{png,flow,json}``, ``root/base.png`` and
    merge this set into ``root/manifest.json``."""
    from . import io

    root = Path(root)
    out = root / setting.set_id
    out.mkdir(parents=True, exist_ok=True)
    io.write_image(root / "base.png", base)
    entries = []
    for s in samples:
        stem = f"{s.provenance['index']:04d}"
        io.write_image(out / f"{stem}.png", s.image)
        io.write_flow(out / f"{stem}.flow", s.flow)
        io.write_json(out / f"{stem}.json", s.provenance)
        entries.append({"stem": stem, "image": f"{setting.set_id}/{stem}.png",
                        "flow": f"{setting.set_id}/{stem}.flow", "amplitude": s.provenance["amplitude"]})
    manifest_path = root / "manifest.json"
    manifest = {"base": "base.png", "sets": {}}
    if manifest_path.exists():
        import json

        manifest = json.loads(manifest_path.read_text())
    manifest["sets"][setting.set_id] = {"setting": setting.to_dict(), "count": len(samples), "samples": entries}
    io.write_json(manifest_path, manifest)
    return manifest


# ---------------------------------------------------------------------------
# base images
# ---------------------------------------------------------------------------


def make_page(shape=(256, 256), seed=0, color=True):
    """A synthetic document: title bar, justified 'text' lines of word blocks,
    a ruled table and faint paper grain."""
    rng = np.random.default_rng(seed)
    H, W = shape
    ink = np.array([0.1, 0.1, 0.15])
    img = np.ones((H, W, 3)) * np.array([0.96, 0.95, 0.92])
    m = max(4, W // 16)
    y = max(3, H // 20)

    def block(y0, y1, x0, x1, col):
        img[max(0, y0):min(H, y1), max(0, x0):min(W, x1)] = col

    title_h = max(3, H // 28)
    block(y, y + title_h, m, W // 2, np.array([0.6, 0.15, 0.15]) if color else ink)
    y += 2 * title_h + 2
    line_h = max(2, H // 64)
    pitch = max(line_h + 3, H // 22)
    table_top = int(H * 0.62)
    while y + line_h < table_top:
        x = m
        indent = rng.integers(0, 3) * line_h if x == m else 0
        x += indent
        while x < W - m:
            wl = int(rng.integers(2, 8) * line_h * 0.9) + 2
            block(y, y + line_h, x, min(x + wl, W - m), ink)
            x += wl + max(2, line_h)
        y += pitch
    rows, cols = 4, 4
    t0, t1 = table_top + 2, H - y // 6 - 4
    x0, x1 = m, W - m
    lw = max(1, H // 200)
    for r in range(rows + 1):
        yy = int(t0 + r * (t1 - t0) / rows)
        block(yy, yy + lw, x0, x1 + lw, ink)
    for c in range(cols + 1):
        xx = int(x0 + c * (x1 - x0) / cols)
        block(t0, t1 + lw, xx, xx + lw, ink)
    cell_h = (t1 - t0) / rows
    for r in range(rows):
        for c in range(cols):
            cy = int(t0 + r * cell_h + cell_h / 2 - line_h / 2)
            cx = int(x0 + c * (x1 - x0) / cols + 3 * lw + 1)
            wl = int(rng.integers(3, 7) * line_h)
            block(cy, cy + line_h, cx, min(cx + wl, int(x0 + (c + 1) * (x1 - x0) / cols) - 2), ink)
    grain = ndimage.gaussian_filter(rng.normal(0, 1, (H, W)), 1.0)
    img = img + 0.015 * grain[..., None]
    img = ndimage.gaussian_filter(img, sigma=(0.6, 0.6, 0))
    if not color:
        img = img.mean(axis=2, keepdims=True)
    return ImageBuffer(np.clip(img, 0, 1), id=f"page{seed}")


def make_texture(shape=(256, 256), seed=0, sigma=1.5):
    """Band-limited random texture in [0, 1] (single channel)."""
    rng = np.random.default_rng(seed)
    a = ndimage.gaussian_filter(rng.random(shape), sigma)
    a = (a - a.min()) / (a.max() - a.min())
    return ImageBuffer(a, id=f"texture{seed}")
