"""Reference implementations used only by the tests.

Each one follows the textbook definition as literally as possible (explicit
loops, brute force, recursion) and shares no code with the package.
"""

import math
from functools import lru_cache

import numpy as np
from scipy.signal import convolve2d


def pairwise_variance(x):
    """Population variance as half the mean squared pairwise difference."""
    x = [float(v) for v in x]
    n = len(x)
    total = 0.0
    for a in x:
        for b in x:
            total += (a - b) ** 2
    return total / (2.0 * n * n)


def edit_distance_recursive(a, b):
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


def bbox_area_at(points, deg):
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    x = points[:, 0] * c + points[:, 1] * s
    y = -points[:, 0] * s + points[:, 1] * c
    return (x.max() - x.min()) * (y.max() - y.min())


def brute_min_rect_area(points, step=0.01, candidates=5, depth=9):
    """Scan every ``step`` degrees over [0, 90), then repeatedly rescan ten
    times finer around the best few angles."""
    pts = np.asarray(points, dtype=np.float64)
    angles = np.arange(0.0, 90.0, step)
    r = np.radians(angles)[:, None]
    x = pts[:, 0] * np.cos(r) + pts[:, 1] * np.sin(r)
    y = -pts[:, 0] * np.sin(r) + pts[:, 1] * np.cos(r)
    areas = np.ptp(x, axis=1) * np.ptp(y, axis=1)
    best = float(areas.min())
    for k in np.argsort(areas)[:candidates]:
        centre, h = angles[k], step
        for _ in range(depth):
            scan = centre + np.linspace(-h, h, 21)
            vals = [bbox_area_at(pts, a) for a in scan]
            j = int(np.argmin(vals))
            centre, h = scan[j], h / 10.0
            best = min(best, vals[j])
    return best


def bilinear_pixel(img, x, y):
    """Edge-clamped bilinear sample of a 2D array at one point."""
    H, W = img.shape
    x = min(max(x, 0.0), W - 1.0)
    y = min(max(y, 0.0), H - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, W - 1), min(y0 + 1, H - 1)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * img[y0, x0] + fx * (1 - fy) * img[y0, x1]
            + (1 - fx) * fy * img[y1, x0] + fx * fy * img[y1, x1])


def sobel_direct(g):
    """|Sobel| along x and y by explicit 3x3 sums with replicated borders,
    max-normalised."""
    H, W = g.shape
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]]
    gx = np.zeros((H, W))
    gy = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            sx = sy = 0.0
            for di in range(3):
                for dj in range(3):
                    v = g[min(max(i + di - 1, 0), H - 1), min(max(j + dj - 1, 0), W - 1)]
                    sx += kx[di][dj] * v
                    sy += ky[di][dj] * v
            gx[i, j] = abs(sx)
            gy[i, j] = abs(sy)
    gx = gx / gx.max() if gx.max() > 0 else gx
    gy = gy / gy.max() if gy.max() > 0 else gy
    return gx, gy


def aad_direct(gx, gy, vx, vy, eps=1e-8):
    """AAD by explicit loops: weighted row/column means guarded by ``eps``
    (lines with weight below eps deviate by 0), Euclidean combination, mean."""
    H, W = vx.shape
    m = [0.0] * H
    row_ok = [False] * H
    for i in range(H):
        tot = sum(gy[i][j] for j in range(W))
        if tot >= eps:
            row_ok[i] = True
            m[i] = sum(gy[i][j] * vy[i][j] for j in range(W)) / tot
    n = [0.0] * W
    col_ok = [False] * W
    for j in range(W):
        tot = sum(gx[i][j] for i in range(H))
        if tot >= eps:
            col_ok[j] = True
            n[j] = sum(gx[i][j] * vx[i][j] for i in range(H)) / tot
    total = 0.0
    for i in range(H):
        for j in range(W):
            dr = gy[i][j] * abs(vy[i][j] - m[i]) if row_ok[i] else 0.0
            dc = gx[i][j] * abs(vx[i][j] - n[j]) if col_ok[j] else 0.0
            total += math.sqrt(dr * dr + dc * dc)
    return total / (H * W)


def grid_uv_of(r, c, s, t, h, w):
    """UV coordinate of local point (s, t) in cell (r, c) of a uniform h x w UV grid."""
    return (c + s) / (w - 1), (r + t) / (h - 1)


def bilinear_point(cell, s, t):
    p00, p01, p10, p11 = cell
    return (1 - s) * (1 - t) * p00 + s * (1 - t) * p01 + (1 - s) * t * p10 + s * t * p11


def central_difference_grad(f, x, step=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        g[idx] = (f(xp) - f(xm)) / (2 * step)
    return g


def sinusoid_lattice_max(terms, shape, amplitude):
    """Largest |d| over the pixel lattice of a plane-wave sum rescaled to
    ``amplitude``, evaluated term by term in plain Python loops."""
    H, W = shape
    raw = np.zeros((H, W, 2))
    for fx, fy, phase, direction, weight in terms:
        for y in range(H):
            for x in range(W):
                wave = weight * math.sin(2 * math.pi * (fx * x / W + fy * y / H) + phase)
                raw[y, x, 0] += math.cos(direction) * wave
                raw[y, x, 1] += math.sin(direction) * wave
    mag = np.sqrt((raw ** 2).sum(-1))
    return mag.max() * amplitude / mag.max()


def gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ms_ssim_reference(a, b, weights=(0.0448, 0.2856, 0.3001, 0.2363, 0.1333), k1=0.01, k2=0.03, L=1.0):
    """Five-scale MS-SSIM with 2D valid convolution and 2x2 mean pooling."""
    win = gaussian_window()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    for i in range(len(weights)):
        f = lambda z: convolve2d(z, win, mode="valid")  # noqa: E731
        mu_a, mu_b = f(a), f(b)
        saa = f(a * a) - mu_a ** 2
        sbb = f(b * b) - mu_b ** 2
        sab = f(a * b) - mu_a * mu_b
        cs = (2 * sab + c2) / (saa + sbb + c2)
        if i == len(weights) - 1:
            lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
            vals.append(max(0.0, float(np.mean(lum * cs))))
        else:
            vals.append(max(0.0, float(np.mean(cs))))
            h, w = (a.shape[0] // 2) * 2, (a.shape[1] // 2) * 2
            a = a[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
            b = b[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
    out = 1.0
    for v, wt in zip(vals, weights):
        out *= v ** wt
    return out
