"""On-disk formats: AAGRID1 grids (binary or JSON mirror), AAFLOW1 flow
fields and PNG images.

Binary layouts are little-endian.  Grid coordinates are stored normalised:
2D points as ``(x / (W - 1), y / (H - 1))`` of the image they address.
"""

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .flow import FlowField
from .geometry import Grid2D, Grid3D, ImageBuffer

GRID_MAGIC = b"AAGRID1\0"
FLOW_MAGIC = b"AAFLOW1\0"
_GRID_HEADER = struct.Struct("<8sIIB")
_FLOW_HEADER = struct.Struct("<8sII")
_FLOW_RECORD = np.dtype([("vx", "<f4"), ("vy", "<f4"), ("valid", "u1")])


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def normalize_grid(points, image_size):
    H, W = image_size
    return points / np.array([W - 1.0, H - 1.0])


def denormalize_grid(points, image_size):
    H, W = image_size
    return points * np.array([W - 1.0, H - 1.0])


def encode_grid(points):
    p = np.asarray(points, dtype="<f4")
    h, w, dim = p.shape
    if dim not in (2, 3):
        raise FormatError(f"grid dim must be 2 or 3, got {dim}")
    return _GRID_HEADER.pack(GRID_MAGIC, h, w, dim) + p.tobytes(order="C")


def decode_grid(data):
    """Parse AAGRID1 bytes or the JSON mirror into an (h, w, dim) float64 array."""
    if data[:8] == GRID_MAGIC:
        if len(data) < _GRID_HEADER.size:
            raise FormatError("truncated AAGRID1 header")
        _, h, w, dim = _GRID_HEADER.unpack_from(data)
        if dim not in (2, 3):
            raise FormatError(f"bad grid dim {dim}")
        n = h * w * dim
        body = data[_GRID_HEADER.size:]
        if len(body) != 4 * n:
            raise FormatError(f"AAGRID1 body has {len(body)} bytes, expected {4 * n}")
        return np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(h, w, dim)
    try:
        obj = json.loads(data.decode("utf-8") if isinstance(data, bytes) else data)
        h, w, dim = int(obj["h"]), int(obj["w"]), int(obj["dim"])
        pts = np.asarray(obj["points"], dtype=np.float64).reshape(h, w, dim)
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not an AAGRID1 or JSON grid: {exc}") from exc
    return pts


def write_grid(path, grid, image_size=None, as_json=None):
    """Write a grid.  2D grids are normalised by ``image_size`` (H, W) when
    given; otherwise points are written as-is.  ``as_json`` defaults to the
    ``.json`` suffix."""
    path = Path(path)
    pts = grid.points if hasattr(grid, "points") else np.asarray(grid, dtype=np.float64)
    if image_size is not None and pts.shape[2] == 2:
        pts = normalize_grid(pts, image_size)
    if as_json is None:
        as_json = path.suffix.lower() == ".json"
    if as_json:
        h, w, dim = pts.shape
        path.write_text(json.dumps({"h": h, "w": w, "dim": dim, "points": pts.reshape(-1).tolist()}))
    else:
        path.write_bytes(encode_grid(pts))


def read_grid(path, image_size=None):
    """Read a grid; 2D grids come back in pixels when ``image_size`` is given."""
    pts = decode_grid(Path(path).read_bytes())
    if pts.shape[2] == 3:
        return Grid3D(pts)
    if image_size is not None:
        pts = denormalize_grid(pts, image_size)
    return Grid2D(pts)


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def encode_flow(flow):
    H, W = flow.shape
    rec = np.empty(H * W, dtype=_FLOW_RECORD)
    rec["vx"] = flow.vx.ravel()
    rec["vy"] = flow.vy.ravel()
    rec["valid"] = flow.valid.ravel()
    return _FLOW_HEADER.pack(FLOW_MAGIC, H, W) + rec.tobytes()


def decode_flow(data):
    if data[:8] != FLOW_MAGIC or len(data) < _FLOW_HEADER.size:
        raise FormatError("not an AAFLOW1 file")
    _, H, W = _FLOW_HEADER.unpack_from(data)
    body = data[_FLOW_HEADER.size:]
    if len(body) != H * W * _FLOW_RECORD.itemsize:
        raise FormatError(f"AAFLOW1 body has {len(body)} bytes, expected {H * W * _FLOW_RECORD.itemsize}")
    rec = np.frombuffer(body, dtype=_FLOW_RECORD)
    return FlowField(
        rec["vx"].astype(np.float64).reshape(H, W),
        rec["vy"].astype(np.float64).reshape(H, W),
        rec["valid"].astype(bool).reshape(H, W),
    )


def write_flow(path, flow):
    Path(path).write_bytes(encode_flow(flow))


def read_flow(path):
    return decode_flow(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------


def read_image(path, id=None):
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        a = np.asarray(im, dtype=np.float64) / 255.0
    return ImageBuffer(a, id=id if id is not None else Path(path).stem)


def to_uint8(image):
    a = image.data if isinstance(image, ImageBuffer) else np.asarray(image, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    return np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image):
    Image.fromarray(to_uint8(image)).save(path)


def write_json(path, obj):
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    Path(path).write_text(dumps(obj, indent=2) + "\n")


def dumps(obj, indent=None):
    return json.dumps(obj, sort_keys=True, indent=indent, separators=(",", ": ") if indent else (",", ":"),
                      allow_nan=False, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
