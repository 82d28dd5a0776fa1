"""Grid types, mesh interpolation into UV space, backward remapping and the
rotated-rectangle machinery used by axis-alignment preprocessing.

Coordinate convention: pixel centres sit at integer coordinates, the origin is
the top-left pixel, x grows rightward and y downward.  Grid arrays have shape
``(h, w, dim)``; row ``r`` runs top to bottom, column ``c`` left to right.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _kernels
from .errors import (
    DegenerateInputError,
    InvalidDimensionError,
    InvalidInputError,
    InvalidMeshError,
)

LUMA = np.array([0.299, 0.587, 0.114])

NEWTON_MAXIT = 25
NEWTON_TOL = 1e-10
SNAP_TOL = 1e-7
EDGE_SNAP_TOL = 1e-12


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrameTransform:
    """3x3 homogeneous similarity transform (rotation, translation, scale)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidInputError("transform must be a finite 3x3 matrix")
        if abs(np.linalg.det(m[:2, :2])) < 1e-300:
            raise InvalidInputError("transform is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx, ty):
        m = np.eye(3)
        m[0, 2], m[1, 2] = tx, ty
        return cls(m)

    @classmethod
    def rotation(cls, degrees, center=(0.0, 0.0), scale=1.0):
        """Rotation by ``degrees`` (counter-clockwise in a y-up frame, i.e.
        clockwise on screen) about ``center``."""
        a = np.deg2rad(degrees)
        c, s = np.cos(a) * scale, np.sin(a) * scale
        cx, cy = center
        m = np.array([[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy], [0.0, 0.0, 1.0]])
        return cls(m)

    def inverse(self):
        return FrameTransform(np.linalg.inv(self.matrix))

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return FrameTransform(self.matrix @ other.matrix)

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        m = self.matrix
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([m[0, 0] * x + m[0, 1] * y + m[0, 2], m[1, 0] * x + m[1, 1] * y + m[1, 2]], axis=-1)

    def to_list(self):
        return self.matrix.tolist()


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """H x W x C float raster in [0, 1].

    ``origin`` maps this image's pixel frame to the frame of the image it was
    cropped from (``None`` means the image is its own root frame).
    """

    data: np.ndarray
    id: Optional[str] = None
    origin: Optional[FrameTransform] = None

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise InvalidInputError(f"image must be HxW, HxWx1 or HxWx3, got {a.shape}")
        if a.shape[0] == 0 or a.shape[1] == 0:
            raise InvalidInputError("empty image")
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("image contains non-finite samples")
        a = np.clip(a, 0.0, 1.0)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape[:2]

    def gray(self):
        """Luma (0.299, 0.587, 0.114) as an H x W array."""
        if self.channels == 1:
            return self.data[:, :, 0]
        return self.data @ LUMA

    def root_transform(self):
        return self.origin if self.origin is not None else FrameTransform.identity()

    def with_data(self, data):
        return ImageBuffer(data, id=self.id, origin=self.origin)


def as_image(x):
    return x if isinstance(x, ImageBuffer) else ImageBuffer(x)


def to_gray(x):
    if isinstance(x, ImageBuffer):
        return x.gray()
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 3:
        return a[:, :, 0] if a.shape[2] == 1 else a @ LUMA
    return a


@dataclass(frozen=True, eq=False)
class _Grid:
    points: np.ndarray
    dim = 2

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != self.dim:
            raise InvalidDimensionError(f"{type(self).__name__} needs shape (h, w, {self.dim}), got {p.shape}")
        if p.shape[0] < 2 or p.shape[1] < 2:
            raise InvalidDimensionError(f"grid must be at least 2x2, got {p.shape[:2]}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("grid coordinates must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def h(self):
        return self.points.shape[0]

    @property
    def w(self):
        return self.points.shape[1]

    @property
    def shape(self):
        return self.points.shape[:2]


class Grid2D(_Grid):
    """h x w backward-mapping grid of (x, y) pixel coordinates."""

    dim = 2

    @property
    def x(self):
        return self.points[..., 0]

    @property
    def y(self):
        return self.points[..., 1]


class Grid3D(_Grid):
    dim = 3


class UVGrid(_Grid):
    """h x w grid of (u, v) points in the unit square."""

    dim = 2

    @property
    def u(self):
        return self.points[..., 0]

    @property
    def v(self):
        return self.points[..., 1]


@dataclass(frozen=True)
class RotatedRect:
    center: tuple
    size: tuple  # (width, height), width >= height
    angle: float  # degrees in [-90, 90), direction of the width side

    @property
    def area(self):
        return self.size[0] * self.size[1]

    def axes(self):
        a = np.deg2rad(self.angle)
        return np.array([np.cos(a), np.sin(a)]), np.array([-np.sin(a), np.cos(a)])

    def corners(self):
        e, n = self.axes()
        c = np.asarray(self.center, dtype=np.float64)
        hw, hh = self.size[0] / 2.0, self.size[1] / 2.0
        return np.array([c - hw * e - hh * n, c + hw * e - hh * n, c + hw * e + hh * n, c - hw * e + hh * n])

    def to_dict(self):
        return {"center": [float(v) for v in self.center], "size": [float(v) for v in self.size],
                "angle": float(self.angle)}


class MeshLocation(NamedTuple):
    row: int
    col: int
    s: float
    t: float
    extrapolated: bool


# ---------------------------------------------------------------------------
# uniform grids and bilinear helpers
# ---------------------------------------------------------------------------


def make_uniform_uv_grid(h, w):
    if h < 2 or w < 2:
        raise InvalidDimensionError(f"uniform grid needs h, w >= 2, got ({h}, {w})")
    u = np.arange(w, dtype=np.float64) / (w - 1)
    v = np.arange(h, dtype=np.float64) / (h - 1)
    uu, vv = np.meshgrid(u, v)
    return UVGrid(np.stack([uu, vv], axis=-1))


def uniform_pixel_grid(h, w, width, height, x0=0.0, y0=0.0):
    """Grid spanning ``[x0, x0 + width - 1] x [y0, y0 + height - 1]``."""
    uv = make_uniform_uv_grid(h, w).points
    return Grid2D(uv * np.array([width - 1.0, height - 1.0]) + np.array([x0, y0]))


def bilinear(c00, c01, c10, c11, s, t):
    """Bilinear blend of cell corners; ``s`` runs along columns, ``t`` along rows."""
    s = np.asarray(s)[..., None]
    t = np.asarray(t)[..., None]
    return (1 - s) * (1 - t) * c00 + s * (1 - t) * c01 + (1 - s) * t * c10 + s * t * c11


def cell_corners(points, rows, cols):
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    return (points[rows, cols], points[rows, cols + 1], points[rows + 1, cols], points[rows + 1, cols + 1])


def check_mesh(mesh):
    """Raise unless every quad cell has a bilinear Jacobian of one global sign
    at all four corners (equivalently: all cells strictly convex and
    consistently oriented, so the cell map is invertible)."""
    p = mesh.points if isinstance(mesh, _Grid) else np.asarray(mesh)
    c00, c01, c10, c11 = p[:-1, :-1], p[:-1, 1:], p[1:, :-1], p[1:, 1:]

    def cross(a, b):
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    jac = np.stack([
        cross(c01 - c00, c10 - c00),
        cross(c01 - c00, c11 - c01),
        cross(c11 - c10, c10 - c00),
        cross(c11 - c10, c11 - c01),
    ])
    if np.all(jac > 0) or np.all(jac < 0):
        return
    raise InvalidMeshError("mesh has degenerate, folded or inconsistently oriented cells")


def _check_same_shape(*grids):
    shapes = {g.shape for g in grids}
    if len(shapes) != 1:
        raise InvalidDimensionError(f"grid shapes differ: {sorted(shapes)}")


# ---------------------------------------------------------------------------
# mesh location and UV mapping
# ---------------------------------------------------------------------------


def locate_many(points, mesh, validate=True):
    """Vectorised :func:`locate_in_mesh`; returns ``(rows, cols, s, t, extrapolated)``."""
    if validate:
        check_mesh(mesh)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    rows, cols, s, t, ext = _kernels.locate_points(pts[:, 0], pts[:, 1], mesh.points[..., 0], mesh.points[..., 1],
                                                   maxit=NEWTON_MAXIT, tol=NEWTON_TOL)
    return rows, cols, _snap_unit(s), _snap_unit(t), ext


def _snap_unit(a):
    """Newton lands a few ulps off cell edges; pin those to exactly 0 or 1 so
    mesh nodes map to their UV values exactly."""
    a = np.where(np.abs(a) < EDGE_SNAP_TOL, 0.0, a)
    return np.where(np.abs(a - 1.0) < EDGE_SNAP_TOL, 1.0, a)


def locate_in_mesh(p, mesh):
    rows, cols, s, t, ext = locate_many(np.asarray(p, dtype=np.float64)[None], mesh)
    return MeshLocation(int(rows[0]), int(cols[0]), float(s[0]), float(t[0]), bool(ext[0]))


def uv_map(P, P_gt, Q_gt, return_locations=False):
    """Carry every predicted point into UV space through the ground-truth mesh.

    Each ``p`` is located in ``P_gt`` (inverse bilinear per cell) and ``Q_gt``
    is read bilinearly at the recovered local coordinates.  Points beyond the
    mesh are extrapolated with the nearest boundary cell's bilinear map.
    """
    _check_same_shape(P, P_gt, Q_gt)
    rows, cols, s, t, ext = locate_many(P.points.reshape(-1, 2), P_gt)
    q = bilinear(*cell_corners(Q_gt.points, rows, cols), s, t).reshape(P.points.shape)
    Q = UVGrid(q)
    if return_locations:
        shape = P.shape
        return Q, (rows.reshape(shape), cols.reshape(shape), s.reshape(shape), t.reshape(shape), ext.reshape(shape))
    return Q


# ---------------------------------------------------------------------------
# remapping
# ---------------------------------------------------------------------------


def upsample_grid(points, out_size):
    """Bilinear (corner-aligned) upsampling of an (h, w, d) grid to (H', W', d)."""
    H, W = out_size
    h, w = points.shape[:2]
    fr = np.arange(H, dtype=np.float64) * (h - 1) / (H - 1)
    fc = np.arange(W, dtype=np.float64) * (w - 1) / (W - 1)
    r0 = np.minimum(np.floor(fr).astype(np.int64), h - 2)
    c0 = np.minimum(np.floor(fc).astype(np.int64), w - 2)
    a = (fr - r0)[:, None, None]
    b = (fc - c0)[None, :, None]
    R0, C0 = r0[:, None], c0[None, :]
    return ((1 - a) * (1 - b) * points[R0, C0] + (1 - a) * b * points[R0, C0 + 1]
            + a * (1 - b) * points[R0 + 1, C0] + a * b * points[R0 + 1, C0 + 1])


def _snap(coords):
    r = np.round(coords)
    return np.where(np.abs(coords - r) < SNAP_TOL, r, coords)


def sample_image(image, xs, ys):
    """Bilinear edge-clamped sampling of ``image`` at pixel coordinates."""
    img = image.data if isinstance(image, ImageBuffer) else np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return _kernels.sample_bilinear(img[:, :, None], xs, ys)[..., 0]
    return _kernels.sample_bilinear(img, xs, ys)


def remap_image(I, G, out_size):
    """Dewarp ``I`` with the backward grid ``G`` (source-pixel coordinates)."""
    I = as_image(I)
    H, W = int(out_size[0]), int(out_size[1])
    if H < 2 or W < 2:
        raise InvalidDimensionError(f"output size must be at least 2x2, got {(H, W)}")
    pts = G.points if isinstance(G, _Grid) else np.asarray(G, dtype=np.float64)
    dense = _snap(upsample_grid(pts, (H, W)))
    out = sample_image(I, dense[..., 0], dense[..., 1])
    return ImageBuffer(out, id=I.id)


# ---------------------------------------------------------------------------
# rotated rectangles
# ---------------------------------------------------------------------------


def normalize_angle(deg):
    """Map an angle onto [-90, 90)."""
    return float((deg + 90.0) % 180.0 - 90.0)


def fold_angle(deg):
    """Signed distance of an orientation from the nearest image axis, in [-45, 45)."""
    return float((deg + 45.0) % 90.0 - 45.0)


def min_area_rect(points):
    """Minimum-area enclosing rectangle by rotating calipers over the hull.

    One side of the optimum is collinear with a hull edge, so every edge
    direction is tried.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise DegenerateInputError("need at least 3 points")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("points must be finite")
    try:
        hull = pts[ConvexHull(pts).vertices]
    except QhullError as exc:
        raise DegenerateInputError("points are collinear") from exc

    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > 0
    e = edges[keep] / lengths[keep, None]
    n = np.stack([-e[:, 1], e[:, 0]], axis=1)
    pe = hull @ e.T  # (hull points, edges)
    pn = hull @ n.T
    le = pe.max(0) - pe.min(0)
    ln = pn.max(0) - pn.min(0)
    k = int(np.argmin(le * ln))
    me = (pe[:, k].max() + pe[:, k].min()) / 2.0
    mn = (pn[:, k].max() + pn[:, k].min()) / 2.0
    center = me * e[k] + mn * n[k]
    angle = np.degrees(np.arctan2(e[k, 1], e[k, 0]))
    width, height = le[k], ln[k]
    if height > width:
        width, height = height, width
        angle += 90.0
    if not height > 0:
        raise DegenerateInputError("points are collinear")
    return RotatedRect((float(center[0]), float(center[1])), (float(width), float(height)), normalize_angle(angle))


def crop_size(rect, margin):
    """Pixel dimensions ``(height, width)`` of the crop for ``rect`` plus margin."""
    m = margin * max(rect.size)
    return int(round(rect.size[1] + 2 * m)) + 1, int(round(rect.size[0] + 2 * m)) + 1


def rotate_and_crop(I, rect, margin=0.05):
    """Resample ``rect`` (plus ``margin * max(size)`` per side) so its long
    axis is horizontal.

    Returns the crop and the transform from crop pixels to ``I``'s pixels.
    The crop's ``origin`` is chained onto ``I.origin``.
    """
    I = as_image(I)
    if margin < 0:
        raise InvalidInputError("margin must be >= 0")
    if not rect.area > 0:
        raise DegenerateInputError("rectangle has zero area")
    Hc, Wc = crop_size(rect, margin)
    a = np.deg2rad(rect.angle)
    c, s = np.cos(a), np.sin(a)
    ox = rect.center[0] - (c * (Wc - 1) / 2.0 - s * (Hc - 1) / 2.0)
    oy = rect.center[1] - (s * (Wc - 1) / 2.0 + c * (Hc - 1) / 2.0)
    T = FrameTransform(np.array([[c, -s, ox], [s, c, oy], [0.0, 0.0, 1.0]]))
    yy, xx = np.mgrid[0:Hc, 0:Wc].astype(np.float64)
    src = _snap(T.apply(np.stack([xx, yy], axis=-1)))
    out = sample_image(I, src[..., 0], src[..., 1])
    origin = T if I.origin is None else I.origin.compose(T)
    return ImageBuffer(out, id=I.id, origin=origin), T


def apply_transform(G, T):
    return type(G)(T.apply(G.points))
