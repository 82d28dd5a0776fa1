"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is called once per backend to warm up (this triggers numba
compilation, or loads it from the on-disk cache) and is then timed as the
best of ``--repeat`` runs.  Outputs of the two backends are compared so a
speedup never hides a disagreement.
"""

import argparse
import time

import numpy as np

from warpmetrics import _kernels
from warpmetrics.flow import estimate_sift_flow
from warpmetrics.synth import make_texture


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    h, w = 33, 25
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    mx = xx * 10 + rng.normal(0, 1.5, (h, w))
    my = yy * 10 + rng.normal(0, 1.5, (h, w))
    px = rng.uniform(-5, 245, 200_000)
    py = rng.uniform(-5, 325, 200_000)
    yield "locate_points (200k pts, 33x25 mesh)", lambda nb: _kernels.locate_points(px, py, mx, my, use_numba=nb)

    img = rng.random((512, 512, 3))
    xs = rng.uniform(-2, 514, 1_000_000)
    ys = rng.uniform(-2, 514, 1_000_000)
    yield "sample_bilinear (1M samples)", lambda nb: _kernels.sample_bilinear(img, xs, ys, use_numba=nb)

    s1 = rng.random((64, 64, 128))
    s2 = rng.random((64, 64, 128))
    c = np.zeros((64, 64), np.int64)
    yield "data_cost (64x64, r=4)", lambda nb: _kernels.data_cost(s1, s2, c, c, 4, 2.5, use_numba=nb)

    D = _kernels.data_cost(s1, s2, c, c, 4, 2.5)
    yield "belief_propagation (64x64, r=4, 40 it)", (
        lambda nb: _kernels.belief_propagation(D, c, c, 4, 0.15, 1.5, 0.002, 40, use_numba=nb))

    a = make_texture((96, 96), seed=1)
    b = make_texture((96, 96), seed=2)
    yield "estimate_sift_flow (96x96)", lambda nb: estimate_sift_flow(a, b, use_numba=nb)


def same(x, y):
    if isinstance(x, tuple):
        return all(same(p, q) for p, q in zip(x, y))
    if hasattr(x, "vx"):
        return np.array_equal(x.vx, y.vx) and np.array_equal(x.vy, y.vy)
    return np.allclose(x, y, rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _kernels.numba_enabled():
        print("numba is disabled or unavailable; both columns use numpy")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numba s':>9s} {'numpy s':>9s} {'speedup':>8s}  agree")
    for name, fn in cases(rng):
        agree = same(fn(True), fn(False))
        t_nb = best_of(lambda: fn(True), args.repeat)
        t_np = best_of(lambda: fn(False), args.repeat)
        print(f"{name:42s} {t_nb:9.3f} {t_np:9.3f} {t_np / t_nb:7.1f}x  {agree}")


if __name__ == "__main__":
    main()
