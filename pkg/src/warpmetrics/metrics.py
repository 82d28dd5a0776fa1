"""Axis-Aligned Distortion (AAD) and the companion dewarping metrics.

AAD weights each flow component by the normalised Sobel response of the
ground-truth image in the matching direction: vertical flow is compared
against its gradient-weighted row mean wherever the image has horizontal
structure (Sobel along y), and horizontal flow against its column mean
wherever it has vertical structure (Sobel along x).
"""

import shlex
import subprocess
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidDimensionError, InvalidInputError, ParameterError, UndefinedStatisticError
from .geometry import to_gray
from .similarity import ms_ssim  # noqa: F401  (part of the metric surface)

DEFAULT_OCR_COMMAND = "tesseract {image} stdout"


@dataclass(frozen=True, eq=False)
class GradientWeights:
    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class AadParams:
    """``epsilon`` guards the weighted means.

    With ``additive=False`` (default) a row/column whose total weight is below
    ``epsilon`` gets zero deviation and every other line uses the exact
    weighted mean, which keeps AAD invariant to translations.  ``additive=True``
    adds ``epsilon`` to every denominator instead.
    """

    epsilon: float = 1e-8
    additive: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")


@dataclass(frozen=True, eq=False)
class AadResult:
    aad: float
    aad_h: float
    aad_v: float
    d_row: np.ndarray
    d_col: np.ndarray
    d: np.ndarray
    m: np.ndarray
    n: np.ndarray


def sobel_weights(y):
    """Max-normalised absolute Sobel responses of the luma of ``y``.

    ``gx`` differentiates along x (responds to vertical lines), ``gy`` along y.
    Borders replicate the edge pixels.
    """
    g = to_gray(y)
    if g.shape[0] < 3 or g.shape[1] < 3:
        raise InvalidInputError("image must be at least 3x3 for the Sobel operator")
    sx = np.abs(ndimage.sobel(g, axis=1, mode="nearest"))
    sy = np.abs(ndimage.sobel(g, axis=0, mode="nearest"))
    return GradientWeights(_max_normalize(sx), _max_normalize(sy))


def _max_normalize(a):
    m = a.max()
    return a / m if m > 0 else np.zeros_like(a)


def _weighted_line_mean(values, weights, axis, params):
    tot = weights.sum(axis=axis, keepdims=True)
    if params.additive:
        return (values * weights).sum(axis=axis, keepdims=True) / (tot + params.epsilon)
    # offsets from the line's first sample, so a constant line has mean
    # exactly equal to its value and deviates by exactly 0
    first = np.take(values, [0], axis=axis)
    num = ((values - first) * weights).sum(axis=axis, keepdims=True)
    ok = tot >= params.epsilon
    return np.where(ok, first + num / np.where(ok, tot, 1.0), 0.0)


def _check_flow(shape, flow):
    if flow.shape != tuple(shape):
        raise InvalidDimensionError(f"flow {flow.shape} does not match image {tuple(shape)}")


def aad(y, flow, params=AadParams(), weights=None):
    """AAD of ``flow`` (ground truth -> dewarped) on ground-truth image ``y``.

    Invalid flow pixels carry zero weight but still count towards N.
    """
    if weights is None:
        weights = sobel_weights(y)
    _check_flow(weights.gx.shape, flow)
    gx = np.where(flow.valid, weights.gx, 0.0)
    gy = np.where(flow.valid, weights.gy, 0.0)
    m = _weighted_line_mean(flow.vy, gy, 1, params)  # per row
    n = _weighted_line_mean(flow.vx, gx, 0, params)  # per column
    d_row = gy * np.abs(flow.vy - m)
    d_col = gx * np.abs(flow.vx - n)
    if not params.additive:
        d_row = np.where(gy.sum(axis=1, keepdims=True) >= params.epsilon, d_row, 0.0)
        d_col = np.where(gx.sum(axis=0, keepdims=True) >= params.epsilon, d_col, 0.0)
    d = np.sqrt(d_row ** 2 + d_col ** 2)
    return AadResult(
        aad=float(d.mean()),
        aad_h=float(d_row.mean()),
        aad_v=float(d_col.mean()),
        d_row=d_row,
        d_col=d_col,
        d=d,
        m=m[:, 0],
        n=n[0, :],
    )


def ld(flow):
    """Mean flow magnitude over valid pixels."""
    if not flow.valid.any():
        raise InvalidInputError("flow has no valid pixels")
    return float(np.hypot(flow.vx, flow.vy)[flow.valid].mean())


def ad_approx(flow, weights):
    """Gradient-weighted flow deviation after removing the best global
    translation.  An approximation of the aligned-distortion metric, not
    the published definition.

    Returns ``(value, degenerate)``; ``degenerate`` is True when all weights
    are zero, in which case the value is 0.
    """
    _check_flow(weights.gx.shape, flow)
    w = np.where(flow.valid, np.maximum(weights.gx, weights.gy), 0.0)
    tot = w.sum()
    if tot <= 0:
        return 0.0, True
    tx = (w * flow.vx).sum() / tot
    ty = (w * flow.vy).sum() / tot
    return float((w * np.hypot(flow.vx - tx, flow.vy - ty)).sum() / tot), False


def edit_distance(a, b):
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(reference, hypothesis):
    return edit_distance(reference, hypothesis) / max(1, len(reference))


def run_ocr(image_path, command=DEFAULT_OCR_COMMAND, timeout=300):
    """Run an external OCR command and return its stdout, or ``None`` on any
    failure (missing program, nonzero exit, timeout).

    ``{image}`` in ``command`` is replaced by the path; without it the path is
    appended as the last argument.
    """
    parts = shlex.split(command)
    if any("{image}" in p for p in parts):
        parts = [p.replace("{image}", str(image_path)) for p in parts]
    else:
        parts.append(str(image_path))
    try:
        proc = subprocess.run(parts, capture_output=True, text=True, timeout=timeout)
    except (OSError, subprocess.SubprocessError):
        return None
    if proc.returncode != 0:
        return None
    return proc.stdout


def r_squared(truth, estimate):
    """Squared Pearson correlation of paired samples."""
    x = np.asarray(truth, dtype=np.float64)
    y = np.asarray(estimate, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError("r_squared needs two equal-length 1D sequences")
    if x.size < 3:
        raise InvalidInputError("r_squared needs at least 3 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = (dx * dx).sum()
    syy = (dy * dy).sum()
    if sxx == 0 or syy == 0:
        raise UndefinedStatisticError("zero variance: R^2 is undefined")
    return float((dx * dy).sum() ** 2 / (sxx * syy))


def normalized_std(values):
    """Population standard deviation divided by the mean.

    Deviations are taken about the first sample before centring, so a list of
    identical values yields exactly 0.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise InvalidInputError("normalized_std of an empty list")
    mean = x.mean()
    if mean == 0:
        raise UndefinedStatisticError("zero mean: normalized std is undefined")
    k = x - x[0]
    var = max(0.0, float(np.mean(k * k) - np.mean(k) ** 2))
    return float(np.sqrt(var) / abs(mean))
