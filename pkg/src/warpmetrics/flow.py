"""Dense correspondence between a reference image and a comparison image.

Flow is stored at reference pixels: content at ``(x, y)`` in the reference
appears at ``(x + vx, y + vy)`` in the target, so positive ``vx`` means it
moved right.  Two sources exist: the exact flow of a known warp, and a
coarse-to-fine SIFT-flow estimator for real image pairs.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import InvalidDimensionError, InvalidInputError, ParameterError
from .geometry import ImageBuffer, as_image, sample_image, to_gray
from .warps import expand_warp

CANONICAL_MAX_SIDE = 512


@dataclass(frozen=True, eq=False)
class FlowField:
    vx: np.ndarray
    vy: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        vx = np.array(self.vx, dtype=np.float64)
        vy = np.array(self.vy, dtype=np.float64)
        if vx.ndim != 2 or vx.shape != vy.shape:
            raise InvalidDimensionError("vx and vy must be equal-shaped 2D arrays")
        valid = np.ones(vx.shape, bool) if self.valid is None else np.array(self.valid, dtype=bool)
        if valid.shape != vx.shape:
            raise InvalidDimensionError("validity mask shape differs from flow shape")
        if not (np.all(np.isfinite(vx[valid])) and np.all(np.isfinite(vy[valid]))):
            raise InvalidInputError("flow must be finite where valid")
        vx = np.where(valid, vx, 0.0)
        vy = np.where(valid, vy, 0.0)
        for a in (vx, vy, valid):
            a.setflags(write=False)
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.vx.shape

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    def scaled(self, s):
        return FlowField(self.vx * s, self.vy * s, self.valid)

    def magnitude(self):
        return np.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class SiftFlowParams:
    """Parameters of the built-in SIFT-flow estimator.

    Costs are in units of L1 distance between unit-norm 128-d descriptors;
    ``alpha`` is charged per pixel of neighbouring flow difference and
    truncated at ``smooth_trunc``.  ``top_radius`` is the label half-width at
    the coarsest level and is halved at every finer level.

    The total reach is about ``top_radius * 2**(levels-1)`` pixels.  Keep it
    close to the largest expected displacement: with a wider search the
    coarse levels of a page of evenly spaced text lines can lock onto the
    neighbouring line, and the error survives refinement.
    """

    levels: int = 4
    cell_size: int = 2
    orientation_bins: int = 8
    alpha: float = 0.5
    smooth_trunc: float = 1.5
    data_trunc: float = 2.5
    eta: float = 0.002
    top_radius: int = 2
    min_radius: int = 1
    iterations: int = 40
    pyramid_sigma: float = 1.0

    def __post_init__(self):
        if self.levels < 1:
            raise ParameterError("levels must be >= 1")
        if self.top_radius < 1 or self.min_radius < 1:
            raise ParameterError("search radius must be >= 1")
        if self.cell_size < 1 or self.orientation_bins < 2:
            raise ParameterError("cell_size >= 1 and orientation_bins >= 2 required")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")

    def radius(self, level, levels=None):
        """Label half-width at ``level`` (0 = finest) of a ``levels``-deep pyramid."""
        levels = self.levels if levels is None else levels
        return max(self.min_radius, self.top_radius >> (levels - 1 - level))

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------


def flow_from_warp(warp, shape):
    """Exact per-pixel displacement of a warp over an ``(H, W)`` frame."""
    H, W = shape
    d = expand_warp(warp, (H, W))
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    vx, vy = d(xx, yy)
    return FlowField(vx, vy)


def resample_by_flow(target, flow):
    """Pull ``target`` back into the reference frame: ``out(p) = target(p + v(p))``."""
    target = as_image(target)
    if target.shape != flow.shape:
        raise InvalidDimensionError(f"target {target.shape} vs flow {flow.shape}")
    H, W = flow.shape
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    return ImageBuffer(sample_image(target, xx + flow.vx, yy + flow.vy))


# ---------------------------------------------------------------------------
# dense SIFT
# ---------------------------------------------------------------------------


def _central_gradients(g):
    p = np.pad(g, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


def _tent_taps(offset, cell):
    """Integer displacements and weights of a tent of half-width ``cell``
    centred at ``offset`` pixels."""
    lo = int(np.floor(offset - cell)) + 1
    hi = int(np.ceil(offset + cell)) - 1
    js = np.arange(lo, hi + 1)
    w = np.maximum(0.0, 1.0 - np.abs(js - offset) / cell)
    keep = w > 0
    return js[keep], w[keep]


def _shift_sum(a, axis, taps, weights):
    """Sum_j w_j * a[index + j] along ``axis`` with edge clamping."""
    reach = int(np.abs(taps).max())
    pad = [(0, 0)] * a.ndim
    pad[axis] = (reach, reach)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    out = np.zeros(a.shape)
    for j, w in zip(taps, weights):
        out += w * np.take(p, np.arange(reach + j, reach + j + n), axis=axis)
    return out


def dense_sift(I, params=SiftFlowParams()):
    """Per-pixel 4x4-cell orientation-histogram descriptors, shape (H, W, 16*bins).

    Channel order is ``(cell_row * 4 + cell_col) * bins + bin``.  Descriptors
    are L2-normalised, clipped at 0.2 and renormalised; textureless pixels
    keep an all-zero descriptor.
    """
    g = to_gray(I)
    cs = params.cell_size
    H, W = g.shape
    if H < 4 * cs or W < 4 * cs:
        raise InvalidInputError(f"image {g.shape} smaller than one descriptor footprint ({4 * cs} px)")
    nb = params.orientation_bins
    gx, gy = _central_gradients(g)
    mag = np.hypot(gx, gy)
    f = (np.arctan2(gy, gx) / (2 * np.pi / nb)) % nb
    b0 = np.floor(f).astype(np.int64) % nb
    frac = f - np.floor(f)
    b1 = (b0 + 1) % nb
    orient = np.zeros((nb, H, W))
    rr, cc = np.mgrid[0:H, 0:W]
    # b0 != b1 at every pixel, so plain fancy assignment never collides
    orient[b0, rr, cc] = mag * (1 - frac)
    orient[b1, rr, cc] += mag * frac

    offsets = [(k - 1.5) * cs for k in range(4)]
    along_x = []
    for ox in offsets:
        taps, w = _tent_taps(ox, cs)
        along_x.append(_shift_sum(orient, 2, taps, w))
    desc = np.empty((H, W, 16 * nb))
    for ky, oy in enumerate(offsets):
        taps, w = _tent_taps(oy, cs)
        for kx in range(4):
            cell = _shift_sum(along_x[kx], 1, taps, w)
            base = (ky * 4 + kx) * nb
            desc[:, :, base:base + nb] = np.moveaxis(cell, 0, -1)
    return _normalize_descriptors(desc)


def _normalize_descriptors(desc, clip=0.2, floor=1e-6):
    norm = np.linalg.norm(desc, axis=-1, keepdims=True)
    ok = norm > floor
    d = np.where(ok, desc / np.where(ok, norm, 1.0), 0.0)
    d = np.minimum(d, clip)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    return np.where(norm > 0, d / np.where(norm > 0, norm, 1.0), 0.0)


def _descriptor_pyramid(desc, levels, sigma):
    pyr = [desc]
    for _ in range(1, levels):
        d = ndimage.gaussian_filter(pyr[-1], sigma=(sigma, sigma, 0), mode="nearest")
        pyr.append(np.ascontiguousarray(d[::2, ::2]))
    return pyr


def canonical_size(shape, max_side=CANONICAL_MAX_SIDE):
    H, W = shape
    if max_side is None:
        return H, W
    s = max_side / max(H, W)
    return max(1, int(round(H * s))), max(1, int(round(W * s)))


def resize_image(I, size):
    """Bilinear resize to ``(H, W)`` with corner-aligned sampling."""
    I = as_image(I)
    H, W = size
    if (H, W) == I.shape:
        return I
    ys = np.linspace(0, I.height - 1, H)
    xs = np.linspace(0, I.width - 1, W)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ImageBuffer(sample_image(I, xx, yy), id=I.id)


def canonicalize_pair(reference, target, max_side=CANONICAL_MAX_SIDE):
    """Resize the reference to the canonical metric resolution and the target
    to exactly the reference's new size."""
    reference = as_image(reference)
    size = canonical_size(reference.shape, max_side)
    return resize_image(reference, size), resize_image(target, size)


def estimate_sift_flow(reference, target, params=SiftFlowParams(), use_numba=None):
    """Coarse-to-fine SIFT flow from ``reference`` to ``target``.

    Each level matches descriptors inside a ``(2r+1)^2`` window around the
    upsampled coarser estimate with dual-layer loopy min-sum BP.  The result
    is integer-valued (no sub-pixel refinement).
    """
    reference = as_image(reference)
    target = as_image(target)
    if reference.shape != target.shape:
        raise InvalidDimensionError(f"reference {reference.shape} vs target {target.shape}; canonicalize first")
    s1 = dense_sift(reference, params)
    s2 = dense_sift(target, params)
    levels = params.levels
    min_side = min(reference.shape)
    while levels > 1 and (min_side >> (levels - 1)) < 8:
        levels -= 1
    p1 = _descriptor_pyramid(s1, levels, params.pyramid_sigma)
    p2 = _descriptor_pyramid(s2, levels, params.pyramid_sigma)

    fx = fy = None
    for level in range(levels - 1, -1, -1):
        a, b = p1[level], p2[level]
        h, w = a.shape[:2]
        if fx is None:
            cx = np.zeros((h, w), np.int64)
            cy = np.zeros((h, w), np.int64)
        else:
            cx = 2 * np.repeat(np.repeat(fx, 2, 0), 2, 1)[:h, :w]
            cy = 2 * np.repeat(np.repeat(fy, 2, 0), 2, 1)[:h, :w]
        r = params.radius(level, levels)
        D = _kernels.data_cost(a, b, cx, cy, r, params.data_trunc, use_numba=use_numba)
        du, dv = _kernels.belief_propagation(
            D, cx, cy, r, params.alpha, params.smooth_trunc, params.eta, params.iterations, use_numba=use_numba
        )
        fx = cx + du
        fy = cy + dv
    return FlowField(fx.astype(np.float64), fy.astype(np.float64))
