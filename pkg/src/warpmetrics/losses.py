"""Axis-aligned geometric constraint loss, its analytic gradient, grid L1
losses, the SSIM loss and their weighted total."""

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import (
    InvalidDimensionError,
    InvalidInputError,
    NondifferentiableError,
    ParameterError,
)
from .geometry import NEWTON_MAXIT, NEWTON_TOL, _check_same_shape, uv_map
from .similarity import SsimParams, ssim, ssim_loss  # noqa: F401  (re-exported)

BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class LossBreakdown:
    l_hor: float
    l_ver: float
    l_al: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.2
    lam: float = 0.05

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.lam) < 0:
            raise ParameterError("loss weights must be >= 0")

    def to_dict(self):
        return asdict(self)


def _centered(a, axis):
    """Deviations from the mean along ``axis``.  Shifting by the first sample
    first makes a constant line come out exactly zero."""
    k = a - np.take(a, [0], axis=axis)
    return k - k.mean(axis=axis, keepdims=True)


def population_variance(values):
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise InvalidInputError("variance of an empty list")
    return float(np.mean(_centered(x, 0) ** 2))


def _reduce(per_line, reduction):
    if reduction == "sum":
        return float(per_line.sum())
    if reduction == "mean":
        return float(per_line.mean())
    raise ParameterError(f"reduction must be 'sum' or 'mean', got {reduction!r}")


def axis_aligned_loss(Q, reduction="sum"):
    """Row variances of ``v`` plus column variances of ``u``.

    ``reduction='sum'`` adds the per-row/per-column variances; ``'mean'``
    averages them instead, which makes the value grid-size independent.
    """
    u, v = Q.points[..., 0], Q.points[..., 1]
    row_var = (_centered(v, 1) ** 2).mean(axis=1)
    col_var = (_centered(u, 0) ** 2).mean(axis=0)
    l_hor = _reduce(row_var, reduction)
    l_ver = _reduce(col_var, reduction)
    return LossBreakdown(l_hor, l_ver, l_hor + l_ver)


def axis_aligned_loss_from_prediction(P, P_gt, Q_gt, reduction="sum"):
    return axis_aligned_loss(uv_map(P, P_gt, Q_gt), reduction)


def _loss_wrt_uv(Q, reduction):
    u, v = Q.points[..., 0], Q.points[..., 1]
    h, w = u.shape
    du = 2.0 * _centered(u, 0) / h
    dv = 2.0 * _centered(v, 1) / w
    if reduction == "mean":
        du /= w
        dv /= h
    elif reduction != "sum":
        raise ParameterError(f"reduction must be 'sum' or 'mean', got {reduction!r}")
    return du, dv


def _cell_jacobian(points, r, c, s, t):
    """d(point)/d(s, t) of the bilinear cell map, as a (..., 2, 2) array."""
    p00, p01 = points[r, c], points[r, c + 1]
    p10, p11 = points[r + 1, c], points[r + 1, c + 1]
    s = np.asarray(s)[..., None]
    t = np.asarray(t)[..., None]
    ds = (p01 - p00) * (1 - t) + (p11 - p10) * t
    dt = (p10 - p00) * (1 - s) + (p11 - p01) * s
    return np.stack([ds, dt], axis=-1)


def _map_jacobian(P_gt, Q_gt, r, c, s, t):
    """dq/dp for points at local coordinates (s, t) of cell (r, c)."""
    jp = _cell_jacobian(P_gt.points, r, c, s, t)
    jq = _cell_jacobian(Q_gt.points, r, c, s, t)
    return jq @ np.linalg.inv(jp)


def _neighbour_jacobians(p, P_gt, Q_gt, r, c, s, t):
    """Jacobians of every cell sharing the point when it sits on a cell edge."""
    h, w = P_gt.shape
    drs = [0]
    dcs = [0]
    if abs(t) < BOUNDARY_TOL and r > 0:
        drs.append(-1)
    if abs(t - 1) < BOUNDARY_TOL and r < h - 2:
        drs.append(1)
    if abs(s) < BOUNDARY_TOL and c > 0:
        dcs.append(-1)
    if abs(s - 1) < BOUNDARY_TOL and c < w - 2:
        dcs.append(1)
    out = []
    mx, my = P_gt.points[..., 0], P_gt.points[..., 1]
    for dr in drs:
        for dc in dcs:
            if dr == 0 and dc == 0:
                continue
            rr, cc = r + dr, c + dc
            cell = (mx[rr, cc], my[rr, cc], mx[rr, cc + 1], my[rr, cc + 1],
                    mx[rr + 1, cc], my[rr + 1, cc], mx[rr + 1, cc + 1], my[rr + 1, cc + 1])
            s2, t2, _ = _kernels._newton_cell(p[0], p[1], *cell, NEWTON_MAXIT, NEWTON_TOL)
            out.append(_map_jacobian(P_gt, Q_gt, rr, cc, s2, t2))
    return out


def axis_aligned_loss_grad(P, P_gt, Q_gt, reduction="sum", jac_tol=1e-7):
    """Analytic gradient of the axis-aligned loss with respect to ``P``.

    Returns an (h, w, 2) array of (dL/dx, dL/dy).  The UV map is piecewise
    bilinear, so a point on a cell edge is only differentiable if every cell
    touching it yields the same Jacobian (true on affine meshes); otherwise
    :class:`NondifferentiableError` is raised.
    """
    _check_same_shape(P, P_gt, Q_gt)
    Q, (rows, cols, s, t, ext) = uv_map(P, P_gt, Q_gt, return_locations=True)
    J = _map_jacobian(P_gt, Q_gt, rows, cols, s, t)  # (h, w, 2, 2)

    on_edge = (
        (np.abs(s) < BOUNDARY_TOL) | (np.abs(s - 1) < BOUNDARY_TOL)
        | (np.abs(t) < BOUNDARY_TOL) | (np.abs(t - 1) < BOUNDARY_TOL)
    )
    for i, j in zip(*np.nonzero(on_edge)):
        scale = max(1.0, np.abs(J[i, j]).max())
        for other in _neighbour_jacobians(P.points[i, j], P_gt, Q_gt, rows[i, j], cols[i, j], s[i, j], t[i, j]):
            if np.abs(other - J[i, j]).max() > jac_tol * scale:
                raise NondifferentiableError(
                    f"grid point ({i}, {j}) lies on a cell boundary where the UV map has a kink; jitter it"
                )

    du, dv = _loss_wrt_uv(Q, reduction)
    dq = np.stack([du, dv], axis=-1)
    return np.einsum("...ij,...i->...j", J, dq)


def l1_grid_loss(G, G_gt):
    a = G.points if hasattr(G, "points") else np.asarray(G, dtype=np.float64)
    b = G_gt.points if hasattr(G_gt, "points") else np.asarray(G_gt, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidDimensionError(f"grid shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def total_loss(parts, weights=LossWeights()):
    """Weighted sum of ``l2d``, ``l3d``, ``l_al`` and ``l_ssim``; absent parts count as 0."""
    return (weights.alpha * parts.get("l2d", 0.0) + weights.beta * parts.get("l3d", 0.0)
            + weights.gamma * parts.get("l_al", 0.0) + weights.lam * parts.get("l_ssim", 0.0))
