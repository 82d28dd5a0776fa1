"""Parametric displacement fields with closed-form forward maps.

A warp is a forward map ``F(x) = x + d(x)`` from reference pixels to target
pixels, so ``d`` *is* the ground-truth flow.  The warped image is produced by
backward sampling ``W(y) = I(F^-1(y))``.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, ParameterError

KINDS = ("identity", "translation", "rotation", "sinusoidal")
MAX_TERMS = 4
MAX_FREQ = 3.0


@dataclass(frozen=True)
class WarpSpec:
    """Description of one geometric disturbance.

    For ``sinusoidal`` warps each term k is a plane wave
    ``w_k * (cos a_k, sin a_k) * sin(2*pi*(fx_k * x/W + fy_k * y/H) + phi_k)``
    and the sum is rescaled so that the largest displacement over the pixel
    lattice equals ``amplitude``.  Empty term tuples are drawn from ``seed``.
    """

    kind: str = "identity"
    amplitude: float = 0.0
    frequencies: tuple = ()
    phases: tuple = ()
    directions: tuple = ()
    weights: tuple = ()
    seed: int = 0
    translation: tuple = (0.0, 0.0)
    angle: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown warp kind {self.kind!r}; expected one of {KINDS}")
        if not self.amplitude >= 0:
            raise ParameterError("amplitude must be >= 0")
        if not self.scale > 0:
            raise ParameterError("scale must be > 0")
        object.__setattr__(self, "frequencies", tuple(tuple(float(v) for v in f) for f in self.frequencies))
        for name in ("phases", "directions", "weights", "translation"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        n = len(self.frequencies)
        if n > MAX_TERMS:
            raise ParameterError(f"at most {MAX_TERMS} sinusoidal terms")
        for name in ("phases", "directions", "weights"):
            if len(getattr(self, name)) not in (0, n):
                raise ParameterError(f"{name} must have one entry per frequency")

    def terms(self):
        """Explicit ``(fx, fy, phase, direction, weight)`` rows for sinusoidal kinds."""
        if self.frequencies:
            n = len(self.frequencies)
            ph = self.phases or (0.0,) * n
            di = self.directions or tuple(np.pi / 2 if i % 2 == 0 else 0.0 for i in range(n))
            wt = self.weights or (1.0,) * n
            return np.array([(f[0], f[1], p, d, w) for f, p, d, w in zip(self.frequencies, ph, di, wt)])
        rng = np.random.default_rng(self.seed)
        k = int(rng.integers(2, MAX_TERMS + 1))
        rows = []
        for i in range(k):
            # alternate mostly-vertical and mostly-horizontal displacement so
            # both text lines (rows) and column edges bend
            along = rng.uniform(0.5, MAX_FREQ)
            across = rng.uniform(0.0, 1.0)
            if i % 2 == 0:
                fx, fy, direction = along, across, np.pi / 2 + rng.uniform(-0.3, 0.3)
            else:
                fx, fy, direction = across, along, rng.uniform(-0.3, 0.3)
            rows.append((fx, fy, rng.uniform(0, 2 * np.pi), direction, rng.uniform(0.5, 1.0)))
        return np.array(rows)

    def with_amplitude(self, amplitude):
        d = asdict(self)
        d["amplitude"] = float(amplitude)
        return WarpSpec(**d)

    def to_dict(self):
        d = asdict(self)
        d["frequencies"] = [list(f) for f in self.frequencies]
        for name in ("phases", "directions", "weights", "translation"):
            d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Displacement:
    """A warp expanded over a concrete ``(H, W)`` frame."""

    def __init__(self, spec, shape):
        self.spec = spec
        self.shape = (int(shape[0]), int(shape[1]))
        H, W = self.shape
        self.center = np.array([(W - 1) / 2.0, (H - 1) / 2.0])
        self._gain = 1.0
        if spec.kind == "sinusoidal":
            self._terms = spec.terms()
            yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
            dx, dy = self._raw(xx, yy)
            peak = np.sqrt(dx * dx + dy * dy).max()
            self._gain = spec.amplitude / peak if peak > 0 else 0.0
        elif spec.kind == "rotation":
            a = np.deg2rad(spec.angle)
            self._R = spec.scale * np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])

    def _raw(self, x, y):
        H, W = self.shape
        dx = np.zeros(np.shape(x))
        dy = np.zeros(np.shape(x))
        for fx, fy, phase, direction, weight in self._terms:
            wave = weight * np.sin(2 * np.pi * (fx * x / W + fy * y / H) + phase)
            dx = dx + np.cos(direction) * wave
            dy = dy + np.sin(direction) * wave
        return dx, dy

    def __call__(self, x, y):
        """Displacement ``(dx, dy)`` at pixel coordinates."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        kind = self.spec.kind
        if kind == "identity":
            return np.zeros_like(x), np.zeros_like(y)
        if kind == "translation":
            tx, ty = self.spec.translation
            return np.full_like(x, tx), np.full_like(y, ty)
        if kind == "rotation":
            fx, fy = self.forward(x, y)
            return fx - x, fy - y
        dx, dy = self._raw(x, y)
        return dx * self._gain, dy * self._gain

    def forward(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if self.spec.kind == "rotation":
            R = self._R
            tx, ty = self.spec.translation
            rx, ry = x - self.center[0], y - self.center[1]
            return (self.center[0] + tx + R[0, 0] * rx + R[0, 1] * ry,
                    self.center[1] + ty + R[1, 0] * rx + R[1, 1] * ry)
        dx, dy = self(x, y)
        return x + dx, y + dy

    def inverse(self, x, y, maxit=200, tol=1e-10):
        """Solve ``F(p) = (x, y)`` for ``p``."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        kind = self.spec.kind
        if kind == "identity":
            return x.copy(), y.copy()
        if kind == "translation":
            tx, ty = self.spec.translation
            return x - tx, y - ty
        if kind == "rotation":
            Ri = np.linalg.inv(self._R)
            tx, ty = self.spec.translation
            rx, ry = x - self.center[0] - tx, y - self.center[1] - ty
            return self.center[0] + Ri[0, 0] * rx + Ri[0, 1] * ry, self.center[1] + Ri[1, 0] * rx + Ri[1, 1] * ry
        px, py = x.copy(), y.copy()
        for _ in range(maxit):
            dx, dy = self(px, py)
            nx, ny = x - dx, y - dy
            step = max(np.abs(nx - px).max(initial=0.0), np.abs(ny - py).max(initial=0.0))
            px, py = nx, ny
            if step < tol:
                return px, py
        raise InvalidInputError("warp is not invertible (fixed-point iteration did not converge)")

    def jacobian_det_min(self):
        """Smallest Jacobian determinant of the forward map over the lattice."""
        H, W = self.shape
        yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
        e = 1e-4
        fxp = self.forward(xx + e, yy)
        fxm = self.forward(xx - e, yy)
        fyp = self.forward(xx, yy + e)
        fym = self.forward(xx, yy - e)
        a = (fxp[0] - fxm[0]) / (2 * e)
        b = (fyp[0] - fym[0]) / (2 * e)
        c = (fxp[1] - fxm[1]) / (2 * e)
        d = (fyp[1] - fym[1]) / (2 * e)
        return float((a * d - b * c).min())


def expand_warp(spec, shape):
    """Expand ``spec`` over an ``(H, W)`` frame into a displacement function."""
    return Displacement(spec, shape)
