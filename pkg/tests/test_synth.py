import json

import numpy as np
import pytest

from warpmetrics import io
from warpmetrics.errors import ParameterError
from warpmetrics.metrics import aad
from warpmetrics.synth import (
    SETS,
    DisturbanceSetting,
    amplitude_schedule,
    apply_color_disturbance,
    apply_shadow,
    make_page,
    make_robustness_corpus,
    make_sample,
    place_page,
    sample_seed,
    shadow_field,
    shadow_params,
    write_corpus,
)


def test_presets_are_cumulative():
    s1, s2, s3 = (DisturbanceSetting.preset(s) for s in SETS)
    assert s1.color_strength == 0 and s1.shadow_min_factor == (1.0, 1.0)
    assert s2.color_strength == 1 and s2.shadow_min_factor == (1.0, 1.0)
    assert s3.color_strength == 1 and s3.shadow_min_factor == (0.4, 0.7)
    assert DisturbanceSetting.from_dict(s3.to_dict()) == s3


@pytest.mark.parametrize("kw", [{"set_id": "Set4"}, {"color_strength": 2.0}, {"shadow_min_factor": (0.3, 0.5)},
                                {"shadow_min_factor": (0.8, 0.5)}])
def test_setting_validation(kw):
    with pytest.raises(ParameterError):
        DisturbanceSetting(**kw)


def test_sample_seeds_are_stable_and_distinct():
    assert sample_seed(7, 3) == sample_seed(7, 3)
    assert len({sample_seed(7, i) for i in range(100)}) == 100


def test_make_page_deterministic(page):
    assert np.array_equal(make_page((256, 256), seed=1).data, page.data)
    assert not np.array_equal(make_page((256, 256), seed=2).data, page.data)
    assert page.channels == 3


def test_samples_share_geometry_across_sets(page):
    samples = {s: make_sample(page, DisturbanceSetting.preset(s, seed=5), 4, 10) for s in SETS}
    f1 = samples["Set1"].flow
    for s in ("Set2", "Set3"):
        assert np.array_equal(samples[s].flow.vx, f1.vx) and np.array_equal(samples[s].flow.vy, f1.vy)
        assert samples[s].provenance["amplitude"] == samples["Set1"].provenance["amplitude"]
    assert "color" in samples["Set2"].provenance and "shadow" in samples["Set3"].provenance
    assert not np.array_equal(samples["Set1"].image.data, samples["Set2"].image.data)


def test_sample_independent_of_corpus_position(page):
    st = DisturbanceSetting.preset("Set3", seed=2)
    corpus = make_robustness_corpus(page, st, 5)
    alone = make_sample(page, st, 3, 5)
    assert np.array_equal(corpus[3].image.data, alone.image.data)
    assert corpus[3].image.id == "0003"


def test_amplitude_schedule_and_monotone_gt_aad(page):
    st = DisturbanceSetting.preset("Set1", seed=1)
    amps = amplitude_schedule(st, 12)
    assert amps[0] == 0.5 and amps[-1] == 10.0
    corpus = make_robustness_corpus(page, st, 12)
    values = [aad(page, s.flow).aad for s in corpus]
    assert all(a < b for a, b in zip(values, values[1:]))
    for s, a in zip(corpus, amps):
        assert s.flow.magnitude().max() == pytest.approx(a, abs=1e-9)


def test_colour_and_shadow_ranges(page):
    st = DisturbanceSetting.preset("Set3", seed=0)
    out = apply_color_disturbance(page, st, 11)
    assert out.data.min() >= 0 and out.data.max() <= 1
    p = shadow_params(st, 11, page.shape)
    assert 0.4 <= p["factor"] <= 0.7
    field = shadow_field(page.shape, p)
    assert field.min() >= p["factor"] - 1e-12 and field.max() <= 1.0
    shaded = apply_shadow(page, st, 11)
    assert np.all(shaded.data <= page.data + 1e-12)
    assert apply_shadow(page, DisturbanceSetting(), 11) is not None


def test_place_page_coverage(page):
    canvas, spec = place_page(page, (300, 400), angle=30.0, coverage=0.5)
    assert canvas.shape == (300, 400)
    assert spec.scale ** 2 * 256 * 256 == pytest.approx(0.5 * 300 * 400)
    bg = np.all(np.isclose(canvas.data, 0.25), axis=-1).mean()
    assert 0.45 < bg < 0.55


def test_write_corpus(tmp_path, page):
    for s in ("Set1", "Set2"):
        st = DisturbanceSetting.preset(s, seed=3)
        write_corpus(tmp_path, page, st, make_robustness_corpus(page, st, 3))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert sorted(manifest["sets"]) == ["Set1", "Set2"]
    assert (tmp_path / "Set2" / "0002.png").exists()
    flow = io.read_flow(tmp_path / "Set1" / "0001.flow")
    want = make_sample(page, DisturbanceSetting.preset("Set1", seed=3), 1, 3).flow
    np.testing.assert_allclose(flow.vx, want.vx, atol=1e-5)
