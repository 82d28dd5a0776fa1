import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import random_mesh, textured_image
from oracles import bilinear_pixel, bilinear_point, brute_min_rect_area, grid_uv_of
from warpmetrics.errors import DegenerateInputError, InvalidDimensionError, InvalidInputError, InvalidMeshError
from warpmetrics.geometry import (
    FrameTransform,
    Grid2D,
    ImageBuffer,
    RotatedRect,
    apply_transform,
    check_mesh,
    crop_size,
    fold_angle,
    locate_in_mesh,
    make_uniform_uv_grid,
    min_area_rect,
    normalize_angle,
    remap_image,
    rotate_and_crop,
    uniform_pixel_grid,
    uv_map,
)


# ---------------------------------------------------------------- images


def test_image_buffer_clamps_and_freezes():
    im = ImageBuffer(np.array([[-0.5, 0.5], [1.5, 1.0]]))
    assert im.data.min() == 0.0 and im.data.max() == 1.0
    assert im.shape == (2, 2) and im.channels == 1
    with pytest.raises(ValueError):
        im.data[0, 0, 0] = 0.3


@pytest.mark.parametrize("bad", [np.zeros((2, 2, 2)), np.zeros((0, 3)), np.full((2, 2), np.nan)])
def test_image_buffer_rejects_bad_input(bad):
    with pytest.raises(InvalidInputError):
        ImageBuffer(bad)


def test_gray_uses_luma():
    rgb = np.zeros((1, 3, 3))
    rgb[0, 0, 0] = rgb[0, 1, 1] = rgb[0, 2, 2] = 1.0
    np.testing.assert_allclose(ImageBuffer(rgb).gray()[0], [0.299, 0.587, 0.114])


# ---------------------------------------------------------------- transforms


@given(st.floats(-180, 180), st.floats(-50, 50), st.floats(-50, 50), st.floats(0.2, 5))
def test_frame_transform_inverse_roundtrip(deg, cx, cy, scale):
    T = FrameTransform.rotation(deg, (cx, cy), scale).compose(FrameTransform.translation(3, -4))
    pts = np.array([[0.0, 0.0], [10.0, -3.0], [5.5, 7.25]])
    np.testing.assert_allclose(T.inverse().apply(T.apply(pts)), pts, atol=1e-9)


def test_rotation_about_centre_fixes_centre():
    T = FrameTransform.rotation(37.0, (4.0, 5.0))
    np.testing.assert_allclose(T.apply(np.array([4.0, 5.0])), [4.0, 5.0], atol=1e-12)
    np.testing.assert_allclose(T.apply(np.array([5.0, 5.0])), [4 + np.cos(np.radians(37)), 5 + np.sin(np.radians(37))])


# ---------------------------------------------------------------- meshes


def test_uniform_uv_grid_layout():
    Q = make_uniform_uv_grid(3, 5)
    assert Q.shape == (3, 5)
    np.testing.assert_allclose(Q.u[0], [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(Q.v[:, 0], [0, 0.5, 1])


def test_check_mesh_rejects_fold():
    p = uniform_pixel_grid(3, 3, 10, 10).points.copy()
    p[1, 1] = [12.0, 12.0]  # past the far corner: cells fold
    with pytest.raises(InvalidMeshError):
        check_mesh(p)


def test_check_mesh_rejects_collapsed_cell():
    p = uniform_pixel_grid(2, 3, 10, 10).points.copy()
    p[:, 1] = p[:, 0]
    with pytest.raises(InvalidMeshError):
        check_mesh(p)


def test_locate_recovers_constructed_points(rng):
    for _ in range(20):
        mesh = random_mesh(rng)
        h, w = mesh.shape
        r, c = int(rng.integers(0, h - 1)), int(rng.integers(0, w - 1))
        s, t = rng.uniform(0.01, 0.99, 2)
        P = mesh.points
        p = bilinear_point((P[r, c], P[r, c + 1], P[r + 1, c], P[r + 1, c + 1]), s, t)
        loc = locate_in_mesh(p, mesh)
        assert (loc.row, loc.col) == (r, c)
        assert abs(loc.s - s) < 1e-9 and abs(loc.t - t) < 1e-9
        assert not loc.extrapolated


def test_locate_outside_extrapolates():
    mesh = uniform_pixel_grid(3, 3, 11, 11)
    loc = locate_in_mesh(np.array([12.5, 5.0]), mesh)
    assert loc.extrapolated and loc.col == 1
    assert loc.s == pytest.approx(1.5)


def test_uv_map_identity_on_nodes(rng):
    mesh = random_mesh(rng, 6, 5)
    Q = make_uniform_uv_grid(6, 5)
    assert np.array_equal(uv_map(mesh, mesh, Q).points, Q.points)


def test_uv_map_matches_oracle(rng):
    for _ in range(10):
        mesh = random_mesh(rng)
        h, w = mesh.shape
        Q = make_uniform_uv_grid(h, w)
        rr = rng.integers(0, h - 1, (h, w))
        cc = rng.integers(0, w - 1, (h, w))
        s, t = rng.uniform(0, 1, (2, h, w))
        P = mesh.points
        pts = np.array([[bilinear_point((P[a, b], P[a, b + 1], P[a + 1, b], P[a + 1, b + 1]), si, ti)
                         for a, b, si, ti in zip(ra, ca, sa, ta)] for ra, ca, sa, ta in zip(rr, cc, s, t)])
        got = uv_map(Grid2D(pts), mesh, Q).points
        want = np.stack(grid_uv_of(rr, cc, s, t, h, w), axis=-1)
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_uv_map_shape_mismatch():
    with pytest.raises(InvalidDimensionError):
        uv_map(uniform_pixel_grid(3, 3, 5, 5), uniform_pixel_grid(3, 4, 5, 5), make_uniform_uv_grid(3, 3))


# ---------------------------------------------------------------- remap


def test_remap_identity_is_bit_exact(rng):
    img = textured_image(rng, (37, 53), color=True)
    G = uniform_pixel_grid(9, 7, 53, 37)
    assert np.array_equal(remap_image(img, G, (37, 53)).data, img.data)


def test_remap_decimation_matches_pixel_oracle(rng):
    img = textured_image(rng, (40, 60))
    G = uniform_pixel_grid(5, 5, 60, 40)
    out = remap_image(img, G, (20, 30)).data[..., 0]
    ys = np.linspace(0, 39, 20)
    xs = np.linspace(0, 59, 30)
    want = np.array([[bilinear_pixel(img.data[..., 0], x, y) for x in xs] for y in ys])
    np.testing.assert_allclose(out, want, atol=1e-9)


def test_remap_clamps_outside():
    img = ImageBuffer(np.arange(12, dtype=float).reshape(3, 4) / 11)
    G = Grid2D(np.array([[[-5.0, -5.0], [10.0, -5.0]], [[-5.0, 10.0], [10.0, 10.0]]]))
    out = remap_image(img, G, (2, 2)).data[..., 0]
    np.testing.assert_allclose(out, [[0, 3 / 11], [8 / 11, 1]])


def test_remap_rejects_tiny_output():
    with pytest.raises(InvalidDimensionError):
        remap_image(ImageBuffer(np.zeros((4, 4))), uniform_pixel_grid(2, 2, 4, 4), (1, 4))


# ---------------------------------------------------------------- rectangles


def test_min_area_rect_unit_square_rotated():
    a = np.radians(20)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    sq = np.array([[0, 0], [2, 0], [2, 1], [0, 1]], float) @ R.T + [5, 7]
    rect = min_area_rect(sq)
    assert rect.area == pytest.approx(2.0)
    assert rect.size[0] >= rect.size[1]
    assert rect.angle == pytest.approx(20.0)
    np.testing.assert_allclose(rect.center, R @ [1, 0.5] + [5, 7])


def test_min_area_rect_matches_brute_force(rng):
    for _ in range(20):
        pts = rng.normal(0, 1, (int(rng.integers(3, 30)), 2)) * rng.uniform(0.5, 5, 2)
        got = min_area_rect(pts).area
        want = brute_min_rect_area(pts)
        assert got <= want * (1 + 1e-12)
        assert abs(got - want) / want < 1e-6


@given(arrays(np.float64, (12, 2), elements=st.floats(-100, 100)), st.floats(-180, 180))
def test_min_area_rect_rotation_equivariant(pts, deg):
    try:
        ref = min_area_rect(pts)
    except DegenerateInputError:
        return
    if ref.area < 1e-3 * max(ref.size) ** 2:
        return
    a = np.radians(deg)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    rotated = pts @ R.T
    rot = min_area_rect(rotated)
    assert rot.area == pytest.approx(ref.area, rel=1e-6)
    # the optimum need not be unique (e.g. right triangles), so check the
    # rotated rectangle is a valid enclosure rather than comparing centres
    e, n = rot.axes()
    d = rotated - rot.center
    tol = 1e-9 * (1 + np.abs(pts).max())
    assert np.all(np.abs(d @ e) <= rot.size[0] / 2 + tol)
    assert np.all(np.abs(d @ n) <= rot.size[1] / 2 + tol)


def test_min_area_rect_contains_points(rng):
    pts = rng.normal(0, 10, (50, 2))
    rect = min_area_rect(pts)
    e, n = rect.axes()
    d = pts - rect.center
    assert np.all(np.abs(d @ e) <= rect.size[0] / 2 + 1e-9)
    assert np.all(np.abs(d @ n) <= rect.size[1] / 2 + 1e-9)


@pytest.mark.parametrize("pts", [np.zeros((5, 2)), np.array([[0, 0], [1, 1], [2, 2], [3, 3.0]]), np.zeros((2, 2))])
def test_min_area_rect_degenerate(pts):
    with pytest.raises(DegenerateInputError):
        min_area_rect(pts)


@given(st.floats(-1000, 1000))
def test_angle_folding_ranges(deg):
    assert -90 <= normalize_angle(deg) < 90
    f = fold_angle(deg)
    assert -45 <= f < 45
    assert ((deg - f) / 90.0) == pytest.approx(round((deg - f) / 90.0), abs=1e-9)


def test_rotate_and_crop_axis_aligned_is_plain_crop(rng):
    img = textured_image(rng, (40, 50))
    rect = RotatedRect((24.0, 19.0), (20.0, 10.0), 0.0)
    crop, T = rotate_and_crop(img, rect, margin=0.0)
    assert crop.shape == crop_size(rect, 0.0) == (11, 21)
    np.testing.assert_allclose(crop.data, img.data[14:25, 14:35], atol=1e-12)
    np.testing.assert_allclose(T.apply(np.array([0.0, 0.0])), [14.0, 14.0])
    assert crop.origin is not None


def test_rotate_and_crop_chains_origin(rng):
    img = textured_image(rng, (60, 60))
    c1, T1 = rotate_and_crop(img, RotatedRect((30.0, 30.0), (40.0, 30.0), 25.0), 0.05)
    c2, T2 = rotate_and_crop(c1, RotatedRect((20.0, 15.0), (20.0, 10.0), -10.0), 0.05)
    p = np.array([3.0, 4.0])
    np.testing.assert_allclose(c2.origin.apply(p), T1.apply(T2.apply(p)), atol=1e-12)


def test_rotate_and_crop_rejects_degenerate():
    with pytest.raises(DegenerateInputError):
        rotate_and_crop(ImageBuffer(np.zeros((5, 5))), RotatedRect((2.0, 2.0), (3.0, 0.0), 0.0))


def test_apply_transform_keeps_type():
    G = uniform_pixel_grid(2, 2, 5, 5)
    out = apply_transform(G, FrameTransform.translation(1, 2))
    assert isinstance(out, Grid2D)
    np.testing.assert_allclose(out.points[0, 0], [1, 2])
