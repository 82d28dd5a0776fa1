"""Evaluation toolkit for document dewarping: the axis-aligned loss, the AAD
metric with SIFT-flow correspondence, synthetic disturbance corpora and the
rotate-and-crop preprocessing loop."""

from ._version import __version__
from .errors import (
    DegenerateInputError,
    FormatError,
    InvalidDimensionError,
    InvalidInputError,
    InvalidMeshError,
    NondifferentiableError,
    ParameterError,
    PredictorError,
    UndefinedStatisticError,
    WarpMetricsError,
)
from .flow import FlowField, SiftFlowParams, estimate_sift_flow, flow_from_warp
from .geometry import (
    FrameTransform,
    Grid2D,
    Grid3D,
    ImageBuffer,
    RotatedRect,
    UVGrid,
    make_uniform_uv_grid,
    min_area_rect,
    remap_image,
    rotate_and_crop,
    uv_map,
)
from .losses import (
    LossWeights,
    axis_aligned_loss,
    axis_aligned_loss_from_prediction,
    axis_aligned_loss_grad,
    population_variance,
    total_loss,
)
from .metrics import AadParams, aad, ad_approx, cer, edit_distance, ld, normalized_std, r_squared, sobel_weights
from .similarity import ms_ssim, ssim
from .warps import WarpSpec, expand_warp
