"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The numba path is used when numba imports and ``WARPMETRICS_DISABLE_NUMBA``
is unset (or ``0``).  Both flavours run the same arithmetic in the same order
so their outputs agree to rounding; ``tests/test_kernels.py`` checks that.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def numba_enabled():
    flag = os.environ.get("WARPMETRICS_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in ("", "0", "false", "no", "off")


# ---------------------------------------------------------------------------
# inverse bilinear point location
# ---------------------------------------------------------------------------


@njit(cache=True)
def _newton_cell(px, py, x00, y00, x01, y01, x10, y10, x11, y11, maxit, tol, s0=0.5, t0=0.5):
    bx = x01 - x00
    by = y01 - y00
    cx = x10 - x00
    cy = y10 - y00
    dx = x11 - x10 - x01 + x00
    dy = y11 - y10 - y01 + y00
    s = s0
    t = t0
    ok = False
    for _ in range(maxit):
        fx = x00 + bx * s + cx * t + dx * s * t - px
        fy = y00 + by * s + cy * t + dy * s * t - py
        j11 = bx + dx * t
        j12 = cx + dx * s
        j21 = by + dy * t
        j22 = cy + dy * s
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            break
        ds = (j22 * fx - j12 * fy) / det
        dt = (j11 * fy - j21 * fx) / det
        s -= ds
        t -= dt
        if abs(ds) < tol and abs(dt) < tol:
            ok = True
            break
    return s, t, ok


@njit(cache=True)
def _seg_param(px, py, ax, ay, bx, by):
    """Squared distance to segment ab and the parameter of the nearest point."""
    ex = bx - ax
    ey = by - ay
    den = ex * ex + ey * ey
    u = 0.0
    if den > 0.0:
        u = ((px - ax) * ex + (py - ay) * ey) / den
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
    qx = ax + u * ex - px
    qy = ay + u * ey - py
    return qx * qx + qy * qy, u


@njit(cache=True)
def _nearest_edge_seed(px, py, x00, y00, x01, y01, x10, y10, x11, y11):
    """Distance to a quad's boundary and the local (s, t) of the nearest
    boundary point.  Seeding Newton there keeps extrapolation on the root
    next to the cell, which varies continuously with the point."""
    d, u = _seg_param(px, py, x00, y00, x01, y01)
    s0, t0 = u, 0.0
    d1, u = _seg_param(px, py, x01, y01, x11, y11)
    if d1 < d:
        d, s0, t0 = d1, 1.0, u
    d1, u = _seg_param(px, py, x11, y11, x10, y10)
    if d1 < d:
        d, s0, t0 = d1, 1.0 - u, 1.0
    d1, u = _seg_param(px, py, x10, y10, x00, y00)
    if d1 < d:
        d, s0, t0 = d1, 0.0, 1.0 - u
    return d, s0, t0


@njit(cache=True)
def _locate_nb(px, py, mx, my, border, maxit, tol, edge_tol, margin):
    n = px.shape[0]
    h, w = mx.shape
    rows = np.empty(n, np.int64)
    cols = np.empty(n, np.int64)
    ss = np.empty(n, np.float64)
    tt = np.empty(n, np.float64)
    ext = np.zeros(n, np.bool_)
    for k in range(n):
        x = px[k]
        y = py[k]
        found = False
        for r in range(h - 1):
            for c in range(w - 1):
                x00 = mx[r, c]
                x01 = mx[r, c + 1]
                x10 = mx[r + 1, c]
                x11 = mx[r + 1, c + 1]
                if x < min(min(x00, x01), min(x10, x11)) - margin:
                    continue
                if x > max(max(x00, x01), max(x10, x11)) + margin:
                    continue
                y00 = my[r, c]
                y01 = my[r, c + 1]
                y10 = my[r + 1, c]
                y11 = my[r + 1, c + 1]
                if y < min(min(y00, y01), min(y10, y11)) - margin:
                    continue
                if y > max(max(y00, y01), max(y10, y11)) + margin:
                    continue
                s, t, ok = _newton_cell(x, y, x00, y00, x01, y01, x10, y10, x11, y11, maxit, tol)
                if ok and s >= -edge_tol and s <= 1.0 + edge_tol and t >= -edge_tol and t <= 1.0 + edge_tol:
                    rows[k] = r
                    cols[k] = c
                    ss[k] = s
                    tt[k] = t
                    found = True
                    break
            if found:
                break
        if found:
            continue
        best = np.inf
        br = 0
        bc = 0
        bs = 0.5
        bt = 0.5
        for q in range(border.shape[0]):
            r = border[q] // (w - 1)
            c = border[q] % (w - 1)
            d, s0, t0 = _nearest_edge_seed(x, y, mx[r, c], my[r, c], mx[r, c + 1], my[r, c + 1],
                                           mx[r + 1, c], my[r + 1, c], mx[r + 1, c + 1], my[r + 1, c + 1])
            if d < best:
                best = d
                br = r
                bc = c
                bs = s0
                bt = t0
        s, t, ok = _newton_cell(
            x, y, mx[br, bc], my[br, bc], mx[br, bc + 1], my[br, bc + 1],
            mx[br + 1, bc], my[br + 1, bc], mx[br + 1, bc + 1], my[br + 1, bc + 1], maxit, tol, bs, bt,
        )
        rows[k] = br
        cols[k] = bc
        ss[k] = s
        tt[k] = t
        ext[k] = True
    return rows, cols, ss, tt, ext


def _newton_vec(px, py, x00, y00, x01, y01, x10, y10, x11, y11, maxit, tol, s0=0.5, t0=0.5):
    bx = x01 - x00
    by = y01 - y00
    cx = x10 - x00
    cy = y10 - y00
    dx = x11 - x10 - x01 + x00
    dy = y11 - y10 - y01 + y00
    s = np.broadcast_to(np.asarray(s0, np.float64), px.shape).copy()
    t = np.broadcast_to(np.asarray(t0, np.float64), px.shape).copy()
    ok = np.zeros(px.shape, bool)
    # work on compacted copies of the still-active elements and shrink them
    # only when something stops, instead of re-gathering every iteration
    idx = np.arange(px.size)
    w = [x00, y00, px, py, bx, by, cx, cy, dx, dy, s.copy(), t.copy()]
    for _ in range(maxit):
        if idx.size == 0:
            break
        ax, ay, qx, qy, bx_, by_, cx_, cy_, dx_, dy_, s_, t_ = w
        fx = ax + bx_ * s_ + cx_ * t_ + dx_ * s_ * t_ - qx
        fy = ay + by_ * s_ + cy_ * t_ + dy_ * s_ * t_ - qy
        j11 = bx_ + dx_ * t_
        j12 = cx_ + dx_ * s_
        j21 = by_ + dy_ * t_
        j22 = cy_ + dy_ * s_
        det = j11 * j22 - j12 * j21
        sing = det == 0.0
        safe = np.where(sing, 1.0, det)
        ds = np.where(sing, 0.0, (j22 * fx - j12 * fy) / safe)
        dt = np.where(sing, 0.0, (j11 * fy - j21 * fx) / safe)
        s_ -= ds
        t_ -= dt
        s[idx] = s_
        t[idx] = t_
        conv = (np.abs(ds) < tol) & (np.abs(dt) < tol) & ~sing
        ok[idx[conv]] = True
        stop = conv | sing
        if stop.any():
            keep = ~stop
            idx = idx[keep]
            w = [a[keep] for a in w]
    return s, t, ok


def _seg_param_vec(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    den = ex * ex + ey * ey
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(den > 0, ((px - ax) * ex + (py - ay) * ey) / np.where(den > 0, den, 1.0), 0.0)
    u = np.clip(u, 0.0, 1.0)
    qx = ax + u * ex - px
    qy = ay + u * ey - py
    return qx * qx + qy * qy, u


def _nearest_edge_seed_vec(px, py, x00, y00, x01, y01, x10, y10, x11, y11):
    d, s0, t0 = None, None, None
    edges = (
        (x00, y00, x01, y01, lambda u: (u, 0.0 * u)),
        (x01, y01, x11, y11, lambda u: (1.0 + 0.0 * u, u)),
        (x11, y11, x10, y10, lambda u: (1.0 - u, 1.0 + 0.0 * u)),
        (x10, y10, x00, y00, lambda u: (0.0 * u, 1.0 - u)),
    )
    for ax, ay, bx, by, param in edges:
        d1, u = _seg_param_vec(px, py, ax, ay, bx, by)
        s1, t1 = param(u)
        if d is None:
            d, s0, t0 = d1, s1, t1
        else:
            # strict '<' keeps the earlier edge on ties, as the scalar kernel does
            closer = d1 < d
            d = np.where(closer, d1, d)
            s0 = np.where(closer, s1, s0)
            t0 = np.where(closer, t1, t0)
    return d, s0, t0


def _locate_np(px, py, mx, my, border, maxit, tol, edge_tol, margin):
    h, w = mx.shape
    n = px.shape[0]
    c00x = mx[:-1, :-1].ravel()
    c01x = mx[:-1, 1:].ravel()
    c10x = mx[1:, :-1].ravel()
    c11x = mx[1:, 1:].ravel()
    c00y = my[:-1, :-1].ravel()
    c01y = my[:-1, 1:].ravel()
    c10y = my[1:, :-1].ravel()
    c11y = my[1:, 1:].ravel()
    xs = np.stack([c00x, c01x, c10x, c11x])
    ys = np.stack([c00y, c01y, c10y, c11y])
    cand = (
        (px[:, None] >= xs.min(0)[None] - margin)
        & (px[:, None] <= xs.max(0)[None] + margin)
        & (py[:, None] >= ys.min(0)[None] - margin)
        & (py[:, None] <= ys.max(0)[None] + margin)
    )
    pi, ci = np.nonzero(cand)
    s, t, ok = _newton_vec(
        px[pi], py[pi], c00x[ci], c00y[ci], c01x[ci], c01y[ci], c10x[ci], c10y[ci], c11x[ci], c11y[ci], maxit, tol
    )
    inside = ok & (s >= -edge_tol) & (s <= 1 + edge_tol) & (t >= -edge_tol) & (t <= 1 + edge_tol)
    pi, ci, s, t = pi[inside], ci[inside], s[inside], t[inside]
    # np.nonzero is row-major, so the first hit per point is its lowest cell index
    pts, first = np.unique(pi, return_index=True)

    cell = np.zeros(n, np.int64)
    ss = np.zeros(n)
    tt = np.zeros(n)
    ext = np.ones(n, bool)
    cell[pts] = ci[first]
    ss[pts] = s[first]
    tt[pts] = t[first]
    ext[pts] = False

    out = np.flatnonzero(ext)
    if out.size:
        b = border
        qx, qy = px[out][:, None], py[out][:, None]
        d, s0, t0 = _nearest_edge_seed_vec(qx, qy, c00x[b], c00y[b], c01x[b], c01y[b],
                                           c10x[b], c10y[b], c11x[b], c11y[b])
        j = np.argmin(d, axis=1)
        k = np.arange(out.size)
        bc = b[j]
        s, t, _ = _newton_vec(
            px[out], py[out], c00x[bc], c00y[bc], c01x[bc], c01y[bc], c10x[bc], c10y[bc], c11x[bc], c11y[bc],
            maxit, tol, s0[k, j], t0[k, j],
        )
        cell[out] = bc
        ss[out] = s
        tt[out] = t
    return cell // (w - 1), cell % (w - 1), ss, tt, ext


def locate_points(px, py, mx, my, maxit=25, tol=1e-10, edge_tol=1e-9, margin=1e-6, use_numba=None):
    """Find the containing quad cell and inverse-bilinear (s, t) for each point.

    Returns ``(rows, cols, s, t, extrapolated)``.  Points outside the mesh are
    assigned to the nearest boundary cell and flagged.
    """
    h, w = mx.shape
    rr, cc = np.meshgrid(np.arange(h - 1), np.arange(w - 1), indexing="ij")
    border = ((rr == 0) | (rr == h - 2) | (cc == 0) | (cc == w - 2)).ravel()
    border = np.flatnonzero(border).astype(np.int64)
    args = (
        np.ascontiguousarray(px, np.float64),
        np.ascontiguousarray(py, np.float64),
        np.ascontiguousarray(mx, np.float64),
        np.ascontiguousarray(my, np.float64),
        border,
        int(maxit),
        float(tol),
        float(edge_tol),
        float(margin),
    )
    if use_numba is None:
        use_numba = numba_enabled()
    return _locate_nb(*args) if use_numba else _locate_np(*args)


# ---------------------------------------------------------------------------
# bilinear sampling with edge clamping
# ---------------------------------------------------------------------------


@njit(cache=True)
def _sample_nb(img, xs, ys):
    H, W, C = img.shape
    n = xs.shape[0]
    out = np.empty((n, C), np.float64)
    for k in range(n):
        x = min(max(xs[k], 0.0), W - 1.0)
        y = min(max(ys[k], 0.0), H - 1.0)
        x0 = int(np.floor(x))
        y0 = int(np.floor(y))
        x1 = min(x0 + 1, W - 1)
        y1 = min(y0 + 1, H - 1)
        fx = x - x0
        fy = y - y0
        for ch in range(C):
            top = img[y0, x0, ch] * (1.0 - fx) + img[y0, x1, ch] * fx
            bot = img[y1, x0, ch] * (1.0 - fx) + img[y1, x1, ch] * fx
            out[k, ch] = top * (1.0 - fy) + bot * fy
    return out


def _sample_np(img, xs, ys):
    H, W, _ = img.shape
    x = np.clip(xs, 0.0, W - 1.0)
    y = np.clip(ys, 0.0, H - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def sample_bilinear(img, xs, ys, use_numba=None):
    """Sample an (H, W, C) array at float pixel coordinates; coordinates are
    clamped to the image so the border pixels repeat."""
    shape = np.shape(xs)
    img = np.ascontiguousarray(img, np.float64)
    xs = np.ascontiguousarray(np.ravel(xs), np.float64)
    ys = np.ascontiguousarray(np.ravel(ys), np.float64)
    if use_numba is None:
        use_numba = numba_enabled()
    out = _sample_nb(img, xs, ys) if use_numba else _sample_np(img, xs, ys)
    return out.reshape(shape + (img.shape[2],))


# ---------------------------------------------------------------------------
# SIFT-flow: truncated-L1 data cost over a per-pixel label window
# ---------------------------------------------------------------------------


@njit(cache=True)
def _data_cost_nb(s1, s2, cx, cy, r, trunc):
    H, W, K = s1.shape
    L = 2 * r + 1
    D = np.empty((H, W, L, L), np.float64)
    for y in range(H):
        for x in range(W):
            for a in range(L):
                qx = min(max(x + cx[y, x] + a - r, 0), W - 1)
                for b in range(L):
                    qy = min(max(y + cy[y, x] + b - r, 0), H - 1)
                    acc = 0.0
                    for k in range(K):
                        acc += abs(s1[y, x, k] - s2[qy, qx, k])
                    D[y, x, a, b] = min(acc, trunc)
    return D


def _data_cost_np(s1, s2, cx, cy, r, trunc):
    H, W, K = s1.shape
    L = 2 * r + 1
    D = np.empty((H, W, L, L), np.float64)
    yy, xx = np.mgrid[0:H, 0:W]
    for a in range(L):
        qx = np.clip(xx + cx + a - r, 0, W - 1)
        for b in range(L):
            qy = np.clip(yy + cy + b - r, 0, H - 1)
            acc = np.zeros((H, W))
            for k in range(K):
                acc += np.abs(s1[:, :, k] - s2[qy, qx, k])
            D[:, :, a, b] = np.minimum(acc, trunc)
    return D


def data_cost(s1, s2, cx, cy, r, trunc, use_numba=None):
    """Cost of matching ``s1[p]`` to ``s2[p + c_p + (u, v)]`` for every label
    pair ``(u, v)`` in ``[-r, r]^2``; shape ``(H, W, 2r+1, 2r+1)``."""
    args = (
        np.ascontiguousarray(s1, np.float64),
        np.ascontiguousarray(s2, np.float64),
        np.ascontiguousarray(cx, np.int64),
        np.ascontiguousarray(cy, np.int64),
        int(r),
        float(trunc),
    )
    if use_numba is None:
        use_numba = numba_enabled()
    return _data_cost_nb(*args) if use_numba else _data_cost_np(*args)


# ---------------------------------------------------------------------------
# SIFT-flow: dual-layer min-sum belief propagation
#
# Horizontal (u) and vertical (v) labels live on two 4-connected layers tied
# together per pixel by the data cost.  Incoming-message arrays are indexed
# [direction, y, x, label] with direction 0/1/2/3 = from left/right/up/down.
# Updates are synchronous so both flavours follow the same schedule.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _bp_nb(D, cx, cy, r, alpha, dmax, eta, iters):
    H, W, L, _ = D.shape
    mu = np.zeros((4, H, W, L))
    mv = np.zeros((4, H, W, L))
    iu = np.zeros((H, W, L))
    iv = np.zeros((H, W, L))
    eu = np.empty((H, W, L))
    ev = np.empty((H, W, L))
    for y in range(H):
        for x in range(W):
            for a in range(L):
                eu[y, x, a] = eta * abs(cx[y, x] + a - r)
                ev[y, x, a] = eta * abs(cy[y, x] + a - r)
    hu = np.empty((H, W, L))
    hv = np.empty((H, W, L))
    tmp = np.empty(L)
    for _ in range(iters):
        for y in range(H):
            for x in range(W):
                for a in range(L):
                    hu[y, x, a] = eu[y, x, a] + iu[y, x, a] + mu[0, y, x, a] + mu[1, y, x, a] + mu[2, y, x, a] + mu[3, y, x, a]
                    hv[y, x, a] = ev[y, x, a] + iv[y, x, a] + mv[0, y, x, a] + mv[1, y, x, a] + mv[2, y, x, a] + mv[3, y, x, a]
        niu = np.empty((H, W, L))
        niv = np.empty((H, W, L))
        nmu = np.zeros((4, H, W, L))
        nmv = np.zeros((4, H, W, L))
        for y in range(H):
            for x in range(W):
                lo = np.inf
                for a in range(L):
                    best = np.inf
                    for b in range(L):
                        c = D[y, x, a, b] + (hv[y, x, b] - iv[y, x, b])
                        if c < best:
                            best = c
                    niu[y, x, a] = best
                    if best < lo:
                        lo = best
                for a in range(L):
                    niu[y, x, a] -= lo
                lo = np.inf
                for b in range(L):
                    best = np.inf
                    for a in range(L):
                        c = D[y, x, a, b] + (hu[y, x, a] - iu[y, x, a])
                        if c < best:
                            best = c
                    niv[y, x, b] = best
                    if best < lo:
                        lo = best
                for b in range(L):
                    niv[y, x, b] -= lo
                # (neighbour offset, direction the neighbour receives from, direction to exclude)
                for k in range(4):
                    if k == 0:
                        qy, qx, recv, excl = y, x + 1, 0, 1
                    elif k == 1:
                        qy, qx, recv, excl = y, x - 1, 1, 0
                    elif k == 2:
                        qy, qx, recv, excl = y + 1, x, 2, 3
                    else:
                        qy, qx, recv, excl = y - 1, x, 3, 2
                    if qy < 0 or qy >= H or qx < 0 or qx >= W:
                        continue
                    for layer in range(2):
                        if layer == 0:
                            dc = cx[y, x] - cx[qy, qx]
                        else:
                            dc = cy[y, x] - cy[qy, qx]
                        for a in range(L):
                            if layer == 0:
                                tmp[a] = hu[y, x, a] - mu[excl, y, x, a]
                            else:
                                tmp[a] = hv[y, x, a] - mv[excl, y, x, a]
                        lo = np.inf
                        for a2 in range(L):
                            best = np.inf
                            for a in range(L):
                                c = tmp[a] + min(alpha * abs(dc + a - a2), dmax)
                                if c < best:
                                    best = c
                            if layer == 0:
                                nmu[recv, qy, qx, a2] = best
                            else:
                                nmv[recv, qy, qx, a2] = best
                            if best < lo:
                                lo = best
                        for a2 in range(L):
                            if layer == 0:
                                nmu[recv, qy, qx, a2] -= lo
                            else:
                                nmv[recv, qy, qx, a2] -= lo
        mu = nmu
        mv = nmv
        iu = niu
        iv = niv
    lu = np.empty((H, W), np.int64)
    lv = np.empty((H, W), np.int64)
    for y in range(H):
        for x in range(W):
            for a in range(L):
                hu[y, x, a] = eu[y, x, a] + mu[0, y, x, a] + mu[1, y, x, a] + mu[2, y, x, a] + mu[3, y, x, a]
                hv[y, x, a] = ev[y, x, a] + mv[0, y, x, a] + mv[1, y, x, a] + mv[2, y, x, a] + mv[3, y, x, a]
            best = np.inf
            ba = 0
            bb = 0
            for a in range(L):
                for b in range(L):
                    c = D[y, x, a, b] + hu[y, x, a] + hv[y, x, b]
                    if c < best:
                        best = c
                        ba = a
                        bb = b
            lu[y, x] = ba - r
            lv[y, x] = bb - r
    return lu, lv


def _smooth_msg_np(h_send, cdiff, L, alpha, dmax):
    out = np.empty(h_send.shape)
    labels = np.arange(L)
    for a2 in range(L):
        best = np.full(h_send.shape[:-1], np.inf)
        for a in range(L):
            c = h_send[..., a] + np.minimum(alpha * np.abs(cdiff + labels[a] - a2), dmax)
            best = np.minimum(best, c)
        out[..., a2] = best
    return out - out.min(axis=-1, keepdims=True)


def _bp_np(D, cx, cy, r, alpha, dmax, eta, iters):
    H, W, L, _ = D.shape
    labels = np.arange(L)
    mu = np.zeros((4, H, W, L))
    mv = np.zeros((4, H, W, L))
    iu = np.zeros((H, W, L))
    iv = np.zeros((H, W, L))
    eu = eta * np.abs(cx[..., None] + labels - r)
    ev = eta * np.abs(cy[..., None] + labels - r)
    for _ in range(iters):
        hu = eu + iu + mu[0] + mu[1] + mu[2] + mu[3]
        hv = ev + iv + mv[0] + mv[1] + mv[2] + mv[3]
        niu = (D + (hv - iv)[:, :, None, :]).min(axis=3)
        niu -= niu.min(axis=-1, keepdims=True)
        niv = (D + (hu - iu)[:, :, :, None]).min(axis=2)
        niv -= niv.min(axis=-1, keepdims=True)
        nmu = np.zeros_like(mu)
        nmv = np.zeros_like(mv)
        for h, m, c, nm in ((hu, mu, cx, nmu), (hv, mv, cy, nmv)):
            # to the right neighbour (it receives "from left")
            nm[0, :, 1:] = _smooth_msg_np(h[:, :-1] - m[1, :, :-1], (c[:, :-1] - c[:, 1:]), L, alpha, dmax)
            nm[1, :, :-1] = _smooth_msg_np(h[:, 1:] - m[0, :, 1:], (c[:, 1:] - c[:, :-1]), L, alpha, dmax)
            nm[2, 1:] = _smooth_msg_np(h[:-1] - m[3, :-1], (c[:-1] - c[1:]), L, alpha, dmax)
            nm[3, :-1] = _smooth_msg_np(h[1:] - m[2, 1:], (c[1:] - c[:-1]), L, alpha, dmax)
        mu, mv, iu, iv = nmu, nmv, niu, niv
    hu = eu + mu[0] + mu[1] + mu[2] + mu[3]
    hv = ev + mv[0] + mv[1] + mv[2] + mv[3]
    total = (D + hu[:, :, :, None] + hv[:, :, None, :]).reshape(H, W, L * L)
    k = np.argmin(total, axis=2)
    return k // L - r, k % L - r


def belief_propagation(D, cx, cy, r, alpha, dmax, eta, iters, use_numba=None):
    """Minimise data + truncated-L1 smoothness + small-displacement energy;
    returns integer label offsets ``(du, dv)`` relative to the centres."""
    args = (
        np.ascontiguousarray(D, np.float64),
        np.ascontiguousarray(cx, np.int64),
        np.ascontiguousarray(cy, np.int64),
        int(r),
        float(alpha),
        float(dmax),
        float(eta),
        int(iters),
    )
    if use_numba is None:
        use_numba = numba_enabled()
    return _bp_nb(*args) if use_numba else _bp_np(*args)
