import numpy as np
import pytest

from helpers import textured_image
from oracles import ms_ssim_reference
from warpmetrics.errors import InvalidDimensionError, InvalidInputError, ParameterError
from warpmetrics.similarity import SsimParams, ms_ssim, ms_ssim_min_side, ssim


def test_ms_ssim_matches_reference(rng):
    a = textured_image(rng, (200, 180))
    b = textured_image(rng, (200, 180))
    noisy = np.clip(a.data[..., 0] + rng.normal(0, 0.05, a.shape), 0, 1)
    for other in (b.data[..., 0], noisy):
        want = ms_ssim_reference(a.data[..., 0], other)
        assert ms_ssim(a, other) == pytest.approx(want, abs=1e-10)


def test_identical_images_score_one(rng):
    a = textured_image(rng, (176, 176), color=True)
    assert ms_ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_scores_are_bounded_and_symmetric(rng):
    a = textured_image(rng, (180, 190))
    b = textured_image(rng, (180, 190))
    s = ms_ssim(a, b)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(ms_ssim(b, a), abs=1e-12)
    assert -1.0 <= ssim(a, b) <= 1.0


def test_more_noise_scores_lower(rng):
    a = textured_image(rng, (176, 176)).data[..., 0]
    scores = [ms_ssim(a, np.clip(a + rng.normal(0, s, a.shape), 0, 1)) for s in (0.01, 0.05, 0.2)]
    assert scores[0] > scores[1] > scores[2]


def test_size_checks(rng):
    assert ms_ssim_min_side() == 176
    with pytest.raises(InvalidInputError):
        ms_ssim(np.zeros((175, 300)), np.zeros((175, 300)))
    with pytest.raises(InvalidDimensionError):
        ssim(np.zeros((20, 20)), np.zeros((20, 21)))
    with pytest.raises(InvalidInputError):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))
    with pytest.raises(ParameterError):
        SsimParams(window=4)
