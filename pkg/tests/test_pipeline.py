import pickle
import sys

import numpy as np
import pytest
from scipy import ndimage

from warpmetrics import io
from warpmetrics.errors import ParameterError, PredictorError
from warpmetrics.flow import resample_by_flow
from warpmetrics.geometry import FrameTransform, Grid2D, ImageBuffer, RotatedRect, uniform_pixel_grid
from warpmetrics.pipeline import (
    CommandPredictor,
    GridPredictor,
    command_predictor,
    coverage,
    dewarp_once,
    dewarp_with_axis_alignment,
    file_predictor,
    oracle_predictor,
    upright_rect,
)
from warpmetrics.synth import apply_warp, make_page, place_page
from warpmetrics.warps import WarpSpec


def psnr(a, b):
    return 10 * np.log10(1.0 / np.mean((a - b) ** 2))


class FixedPredictor:
    def __init__(self, points):
        self.points = points
        self.calls = 0

    def predict(self, image):
        self.calls += 1
        return Grid2D(self.points)


@pytest.fixture(scope="module")
def rotated():
    page = make_page((256, 192), seed=1)
    canvas, spec = place_page(page, (400, 400), angle=30.0, coverage=0.5)
    return page, canvas, oracle_predictor(spec, page.shape)


def test_predictors_satisfy_protocol(tmp_path):
    assert isinstance(file_predictor(tmp_path / "{id}.aagrid"), GridPredictor)
    assert isinstance(oracle_predictor(WarpSpec(), (4, 4)), GridPredictor)
    assert isinstance(command_predictor("true"), GridPredictor)


def test_identity_oracle_grid():
    G = oracle_predictor(WarpSpec(), (30, 40), (4, 5)).predict(ImageBuffer(np.zeros((30, 40))))
    np.testing.assert_allclose(G.points, uniform_pixel_grid(4, 5, 40, 30).points, atol=1e-12)


def test_translation_oracle_dewarps_exactly():
    img = ImageBuffer(np.random.default_rng(0).random((20, 30)))
    spec = WarpSpec("translation", translation=(2.0, 3.0))
    warped, _ = apply_warp(img, spec)
    out, _ = dewarp_once(warped, oracle_predictor(spec, img.shape, (5, 5)))
    np.testing.assert_allclose(out.data[:17, :28], img.data[:17, :28], atol=1e-12)


def test_file_predictor_roundtrip(tmp_path, rng):
    pts = uniform_pixel_grid(5, 4, 60, 50).points + rng.normal(0, 1, (5, 4, 2))
    img = ImageBuffer(np.zeros((50, 60)), id="doc")
    io.write_grid(tmp_path / "doc.aagrid", Grid2D(pts), image_size=img.shape)
    G = file_predictor(tmp_path / "{id}.aagrid").predict(img)
    np.testing.assert_allclose(G.points, pts, rtol=1e-6, atol=1e-4)
    with pytest.raises(PredictorError):
        file_predictor(tmp_path / "{id}.aagrid").predict(ImageBuffer(np.zeros((5, 5)), id="missing"))


@pytest.mark.parametrize("amp", [2.0, 5.0])
def test_oracle_dewarp_of_warped_page(amp):
    raw = make_page((256, 256), seed=1)
    page = ImageBuffer(ndimage.gaussian_filter(raw.data, (1.0, 1.0, 0)))
    spec = WarpSpec("sinusoidal", amp, seed=3)
    warped, _ = apply_warp(page, spec)
    out, _ = dewarp_once(warped, oracle_predictor(spec, page.shape))
    assert psnr(out.data, page.data) >= 30.0
    # on the unblurred page the result is limited by two bilinear passes:
    # the grid route must stay within 0.5 dB of exact per-pixel resampling
    warped, flow = apply_warp(raw, spec)
    out, _ = dewarp_once(warped, oracle_predictor(spec, raw.shape))
    assert psnr(out.data, raw.data) >= psnr(resample_by_flow(warped, flow).data, raw.data) - 0.5


def test_rounds_zero_equals_dewarp_once(rotated):
    _, canvas, pred = rotated
    a, Ga, rep = dewarp_with_axis_alignment(canvas, pred, rounds=0)
    b, Gb = dewarp_once(canvas, pred)
    assert np.array_equal(a.data, b.data) and np.array_equal(Ga.points, Gb.points)
    assert rep.rounds == 0 and len(rep.coverages) == 1


def test_root_grid_is_independent_of_rounds(rotated):
    """Mapping the last grid back through the composed transforms must give
    the grid the oracle predicts on the original image."""
    _, canvas, pred = rotated
    base = pred.predict(canvas).points
    for rounds in (1, 2, 3):
        out, G, rep = dewarp_with_axis_alignment(canvas, pred, rounds=rounds)
        np.testing.assert_allclose(G.points, base, atol=1e-9)
        assert len(rep.transforms) == rounds and len(rep.coverages) == rounds + 1


def test_preprocessing_aligns_and_fills(rotated):
    _, canvas, pred = rotated
    _, _, rep = dewarp_with_axis_alignment(canvas, pred, rounds=1, margin=0.02)
    assert abs(rep.residual_angle) <= 1.0
    assert rep.coverages[1] > rep.coverages[0]
    assert rep.coverage >= 0.85


def test_default_margin_caps_coverage(rotated):
    """With 0.05 * max(size) added per side, a 4:3 page can fill at most
    0.75 / (1.1 * 0.85) of the crop."""
    _, canvas, pred = rotated
    _, _, rep = dewarp_with_axis_alignment(canvas, pred, rounds=1)
    assert rep.coverage == pytest.approx(0.75 / (1.1 * 0.85), abs=0.01)


def test_second_round_is_skipped_when_aligned(rotated):
    _, canvas, pred = rotated
    _, _, one = dewarp_with_axis_alignment(canvas, pred, rounds=1)
    out2, _, two = dewarp_with_axis_alignment(canvas, pred, rounds=2)
    assert two.coverages[2] >= two.coverages[1] == one.coverages[1]
    assert any("skipped" in w for w in two.warnings)
    assert two.transforms[1].to_list() == FrameTransform.identity().to_list()


def test_fallback_on_degenerate_grid():
    pts = np.zeros((3, 3, 2))
    pts[..., 0] = np.arange(3)[None, :]
    pts[..., 1] = np.arange(3)[None, :]  # all points on a line
    pred = FixedPredictor(pts)
    out, G, rep = dewarp_with_axis_alignment(np.zeros((10, 10)), pred, rounds=1)
    assert rep.fallback and rep.warnings
    assert out.shape == (10, 10)


def test_parameter_checks():
    pred = FixedPredictor(uniform_pixel_grid(3, 3, 10, 10).points)
    with pytest.raises(ParameterError):
        dewarp_with_axis_alignment(np.zeros((10, 10)), pred, rounds=-1)
    with pytest.raises(ParameterError):
        dewarp_with_axis_alignment(np.zeros((10, 10)), pred, margin=-0.1)


def test_upright_rect_keeps_portrait_upright():
    r = upright_rect(RotatedRect((0.0, 0.0), (200.0, 100.0), 88.0))
    assert r.angle == pytest.approx(-2.0)
    assert r.size == (100.0, 200.0)
    assert coverage(RotatedRect((0.0, 0.0), (30.0, 30.0), 0.0), (10, 10)) == 1.0


GRID_SCRIPT = """
import sys
import numpy as np
from PIL import Image
from warpmetrics import io
h, w = np.asarray(Image.open(sys.argv[1])).shape[:2]
yy, xx = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), indexing="ij")
io.write_grid(sys.argv[2], np.stack([xx, yy], -1))
"""


def test_command_predictor(tmp_path):
    script = tmp_path / "pred.py"
    script.write_text(GRID_SCRIPT)
    pred = CommandPredictor([sys.executable, str(script)])
    G = pred.predict(ImageBuffer(np.zeros((21, 31))))
    np.testing.assert_allclose(G.points[-1, -1], [30, 20], atol=1e-5)
    clone = pickle.loads(pickle.dumps(pred))
    assert clone.argv == pred.argv
    with pytest.raises(PredictorError):
        CommandPredictor([sys.executable, "-c", "raise SystemExit(2)"]).predict(ImageBuffer(np.zeros((4, 4))))
    with pytest.raises(PredictorError):
        CommandPredictor([sys.executable, "-c", "pass"]).predict(ImageBuffer(np.zeros((4, 4))))
    with pytest.raises(ParameterError):
        CommandPredictor("")
