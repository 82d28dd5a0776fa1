"""Gaussian-window SSIM and five-scale MS-SSIM on luma.

Filtering is 'valid' (no padding): a window only contributes where it fits
entirely inside the image, so the smallest admissible side at the coarsest
MS-SSIM scale is the window size itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidDimensionError, InvalidInputError, ParameterError
from .geometry import to_gray

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ParameterError("SSIM window must be odd and >= 3")
        if not (self.k1 > 0 and self.k2 > 0):
            raise ParameterError("k1 and k2 must be positive")


def _gauss_kernel(size, sigma):
    x = np.arange(size) - size // 2
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(a, kernel):
    r = len(kernel) // 2
    out = ndimage.correlate1d(a, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    return out[r:-r, r:-r]


def _pair(I1, I2):
    a = to_gray(I1)
    b = to_gray(I2)
    if a.shape != b.shape:
        raise InvalidDimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _components(a, b, params):
    """Per-window luminance term and contrast-structure term."""
    if min(a.shape) < params.window:
        raise InvalidInputError(f"image {a.shape} is smaller than the {params.window}px SSIM window")
    k = _gauss_kernel(params.window, params.sigma)
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    mu1 = _filter_valid(a, k)
    mu2 = _filter_valid(b, k)
    s11 = _filter_valid(a * a, k) - mu1 * mu1
    s22 = _filter_valid(b * b, k) - mu2 * mu2
    s12 = _filter_valid(a * b, k) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return lum, cs


def ssim(I1, I2, params=SsimParams()):
    """Mean local SSIM of the luma channels, in [-1, 1]."""
    a, b = _pair(I1, I2)
    lum, cs = _components(a, b, params)
    return float(np.mean(lum * cs))


def ssim_loss(I1, I2, params=SsimParams()):
    return 1.0 - ssim(I1, I2, params)


def _downsample(a):
    h, w = (a.shape[0] // 2) * 2, (a.shape[1] // 2) * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def ms_ssim_min_side(params=SsimParams(), scales=len(MS_SSIM_WEIGHTS)):
    return params.window * 2 ** (scales - 1)


def ms_ssim(I1, I2, params=SsimParams(), weights=MS_SSIM_WEIGHTS):
    """Product over dyadic scales of contrast-structure terms, with the
    luminance term taken at the coarsest scale only.  Negative per-scale
    terms are clamped to 0 before exponentiation."""
    a, b = _pair(I1, I2)
    need = ms_ssim_min_side(params, len(weights))
    if min(a.shape) < need:
        raise InvalidInputError(f"MS-SSIM needs a minimum side of {need}px, got {a.shape}")
    vals = []
    for i in range(len(weights)):
        lum, cs = _components(a, b, params)
        if i == len(weights) - 1:
            vals.append(np.mean(lum * cs))
        else:
            vals.append(np.mean(cs))
            a, b = _downsample(a), _downsample(b)
    vals = np.maximum(np.array(vals), 0.0)
    return float(np.prod(vals ** np.array(weights)))
