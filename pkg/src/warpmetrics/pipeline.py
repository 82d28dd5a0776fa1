"""Grid predictors and the axis-alignment preprocessing loop.

A predictor maps an image to a backward-mapping grid in that image's pixel
frame.  Preprocessing runs predict -> min-area rect -> rotate/crop for a fixed
number of rounds, then maps the last grid back to the original frame and
remaps from the original pixels, so no resampling error accumulates across
rounds.
"""

import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from . import io
from .errors import DegenerateInputError, FormatError, ParameterError, PredictorError, WarpMetricsError
from .geometry import (
    FrameTransform,
    Grid2D,
    ImageBuffer,
    RotatedRect,
    apply_transform,
    as_image,
    fold_angle,
    min_area_rect,
    remap_image,
    rotate_and_crop,
)
from .warps import expand_warp

DEFAULT_GRID_SHAPE = (45, 31)
NOOP_TOL = 1e-6


@runtime_checkable
class GridPredictor(Protocol):
    def predict(self, image):
        """Backward grid (h, w, 2) in ``image``'s pixel coordinates."""


# ---------------------------------------------------------------------------
# predictors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FilePredictor:
    """Reads ``template.format(id=image.id)``; 2D grids on disk are normalised
    by the size of the image they address."""

    template: str

    def path_for(self, image_id):
        return Path(self.template.format(id=image_id))

    def predict(self, image):
        path = self.path_for(image.id)
        try:
            return io.read_grid(path, image_size=image.shape)
        except (OSError, FormatError) as exc:
            raise PredictorError(f"cannot load grid {path}: {exc}", image.id) from exc


@dataclass(frozen=True)
class OraclePredictor:
    """Exact backward grid of a known warp.

    ``warp`` maps the flat reference frame of size ``ref_shape`` into the root
    image; images cropped from the root carry ``origin`` and get the grid in
    their own frame.
    """

    warp: object
    ref_shape: tuple
    grid_shape: tuple = DEFAULT_GRID_SHAPE

    def root_grid(self):
        Hr, Wr = self.ref_shape
        h, w = self.grid_shape
        yy, xx = np.meshgrid(np.linspace(0, Hr - 1, h), np.linspace(0, Wr - 1, w), indexing="ij")
        fx, fy = expand_warp(self.warp, self.ref_shape).forward(xx, yy)
        return np.stack([fx, fy], axis=-1)

    def predict(self, image):
        pts = self.root_grid()
        if image.origin is not None:
            pts = image.origin.inverse().apply(pts)
        return Grid2D(pts)


class CommandPredictor:
    """Runs ``<command> <image.png> <grid.aagrid>`` and reads the grid back.

    Calls are serialised with a lock unless ``serialize=False``.
    """

    def __init__(self, command, serialize=True, timeout=600):
        import shlex

        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ParameterError("empty predictor command")
        self.timeout = timeout
        self._lock = threading.Lock() if serialize else None

    def __getstate__(self):
        return {"argv": self.argv, "timeout": self.timeout, "serialize": self._lock is not None}

    def __setstate__(self, state):
        self.argv = state["argv"]
        self.timeout = state["timeout"]
        self._lock = threading.Lock() if state["serialize"] else None

    def predict(self, image):
        if self._lock is None:
            return self._run(image)
        with self._lock:
            return self._run(image)

    def _run(self, image):
        with tempfile.TemporaryDirectory(prefix="warpmetrics-") as tmp:
            img_path = Path(tmp) / "input.png"
            grid_path = Path(tmp) / "output.aagrid"
            io.write_image(img_path, image)
            try:
                proc = subprocess.run(self.argv + [str(img_path), str(grid_path)],
                                      capture_output=True, text=True, timeout=self.timeout)
            except (OSError, subprocess.SubprocessError) as exc:
                raise PredictorError(f"predictor command failed: {exc}", image.id) from exc
            if proc.returncode != 0:
                raise PredictorError(
                    f"predictor exited with {proc.returncode}: {proc.stderr.strip()[:200]}", image.id)
            try:
                return io.read_grid(grid_path, image_size=image.shape)
            except (OSError, FormatError) as exc:
                raise PredictorError(f"predictor wrote no readable grid: {exc}", image.id) from exc


def file_predictor(template):
    return FilePredictor(str(template))


def oracle_predictor(warp, ref_shape, grid_shape=DEFAULT_GRID_SHAPE):
    return OraclePredictor(warp, tuple(ref_shape), tuple(grid_shape))


def command_predictor(command, serialize=True):
    return CommandPredictor(command, serialize=serialize)


def _predict(predictor, image):
    try:
        G = predictor.predict(image)
    except PredictorError:
        raise
    except WarpMetricsError as exc:
        raise PredictorError(str(exc), image.id) from exc
    if not isinstance(G, Grid2D):
        G = Grid2D(np.asarray(G, dtype=np.float64))
    return G


# ---------------------------------------------------------------------------
# dewarping
# ---------------------------------------------------------------------------


@dataclass
class PreprocessReport:
    rounds: int = 0
    rects: list = field(default_factory=list)
    transforms: list = field(default_factory=list)
    coverages: list = field(default_factory=list)
    residual_angle: float = 0.0
    coverage: float = 0.0
    fallback: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "rounds": self.rounds,
            "rects": [r.to_dict() for r in self.rects],
            "transforms": [t.to_list() for t in self.transforms],
            "coverages": list(self.coverages),
            "residual_angle": self.residual_angle,
            "coverage": self.coverage,
            "fallback": self.fallback,
            "warnings": list(self.warnings),
        }


def dewarp_once(I, predictor, out_size=None):
    I = as_image(I)
    G = _predict(predictor, I)
    return remap_image(I, G, out_size or I.shape), G


def upright_rect(rect):
    """Same rectangle, described by the side closest to the x axis.

    Keeps portrait pages upright instead of turning their long side
    horizontal.  ``size[0]`` is then the extent along ``angle``.
    """
    a = fold_angle(rect.angle)
    turns = int(round((rect.angle - a) / 90.0)) % 2
    size = rect.size if turns == 0 else (rect.size[1], rect.size[0])
    return RotatedRect(rect.center, size, a)


def coverage(rect, shape):
    H, W = shape
    return float(min(1.0, rect.area / (H * W)))


def _is_noop(T, crop_shape, shape):
    return tuple(crop_shape) == tuple(shape) and np.abs(T.matrix - np.eye(3)).max() <= NOOP_TOL


def dewarp_with_axis_alignment(I, predictor, rounds=1, margin=0.05, out_size=None):
    """Returns ``(dewarped, grid in I's frame, PreprocessReport)``.

    A round whose crop would reproduce the current frame (identity transform,
    same size) is skipped, so further rounds never degrade an aligned crop.
    """
    if rounds < 0:
        raise ParameterError("rounds must be >= 0")
    if margin < 0:
        raise ParameterError("margin must be >= 0")
    I = as_image(I)
    root = ImageBuffer(I.data, id=I.id)
    out_size = out_size or I.shape
    report = PreprocessReport()

    def fallback(k, exc):
        rep = PreprocessReport(fallback=True, warnings=[f"round {k}: {exc}; plain dewarp"])
        out, G0 = dewarp_once(root, predictor, out_size)
        return out, G0, rep

    current = root
    G = _predict(predictor, current)
    try:
        rect = upright_rect(min_area_rect(G.points))
    except DegenerateInputError as exc:
        return fallback(0, exc)
    report.rects.append(rect)
    report.coverages.append(coverage(rect, current.shape))
    for k in range(1, rounds + 1):
        crop, T = rotate_and_crop(current, rect, margin)
        if _is_noop(T, crop.shape, current.shape):
            report.warnings.append(f"round {k}: already aligned, skipped")
            T = FrameTransform.identity()
        else:
            current = crop
            G = _predict(predictor, current)
            try:
                rect = upright_rect(min_area_rect(G.points))
            except DegenerateInputError as exc:
                return fallback(k, exc)
        report.rounds = k
        report.transforms.append(T)
        report.rects.append(rect)
        report.coverages.append(coverage(rect, current.shape))

    report.residual_angle = fold_angle(rect.angle)
    report.coverage = report.coverages[-1]
    G_root = apply_transform(G, current.root_transform())
    return remap_image(root, G_root, out_size), G_root, report
