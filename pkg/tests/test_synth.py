"""Synthetic banding corpus: backgrounds, quantization, manifests."""

import json

import numpy as np
import pytest

from fsband import errors
from fsband.masking import spatial_freq_array
from fsband.synth import (
    ALL_KINDS,
    SMOOTH_KINDS,
    SynthConfig,
    apply_banding,
    dither_quantize,
    gen_background,
    gen_dataset,
    load_arrays,
    load_manifest,
    regenerate_record,
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    cfg = SynthConfig(count_per_class=30, side=32, seed=11)
    return gen_dataset(cfg, root)


class TestBackgrounds:
    def test_same_seed_same_patch(self):
        for kind in ALL_KINDS:
            a = gen_background(kind, 32, seed=5)
            b = gen_background(kind, 32, seed=5)
            assert np.array_equal(a, b), kind

    def test_values_in_range(self):
        for kind in ALL_KINDS:
            arr = gen_background(kind, 32, seed=9)
            assert arr.shape == (32, 32)
            assert np.all((arr >= 0.0) & (arr <= 1.0)), kind

    def test_zero_slope_request_is_constant(self):
        arr = gen_background("linear-gradient", 32, seed=3, ramp_range=(0.5, 0.5))
        assert np.all(arr == 0.5)

    def test_texture_busier_than_linear_gradient(self):
        for seed in range(8):
            tex = spatial_freq_array(gen_background("texture", 32, seed)).sf
            lin = spatial_freq_array(gen_background("linear-gradient", 32, seed)).sf
            assert tex > lin

    def test_unknown_kind(self):
        with pytest.raises(errors.UnknownKindError):
            gen_background("perlin", 32, seed=0)


class TestQuantizer:
    def test_ramp_plateaus(self):
        ramp = np.tile(np.linspace(0.0, 1.0, 64), (64, 1))
        banded = apply_banding(ramp, bits=3)
        levels = np.unique(banded)
        assert levels.size == 8
        # plateaus are roughly a step wide
        widths = [np.sum(banded[0] == lv) for lv in levels]
        assert min(widths) >= 4 and max(widths) <= 12

    def test_seven_bit_error_bound(self):
        grid = np.arange(256) / 255.0
        q = apply_banding(grid, bits=7)
        assert np.max(np.abs(grid - q)) <= 1.0 / 254.0 + 1e-12

    def test_constant_stays_constant(self):
        q = apply_banding(np.full((16, 16), 0.42), bits=4)
        assert np.unique(q).size == 1

    def test_idempotent_at_same_depth(self):
        rng = np.random.default_rng(2)
        arr = rng.random((32, 32))
        once = apply_banding(arr, bits=4)
        assert np.array_equal(apply_banding(once, bits=4), once)

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(3)
        q = apply_banding(rng.random((16, 16)), bits=2)
        assert np.all((q >= 0.0) & (q <= 1.0))
        assert np.unique(q).size <= 4


class TestDither:
    def test_breaks_plateaus(self):
        ramp = np.tile(np.linspace(0.0, 1.0, 64), (64, 1))
        banded = apply_banding(ramp, bits=3)
        dithered = dither_quantize(ramp, bits=3, seed=0)
        assert np.unique(dithered).size > 4 * np.unique(banded).size

    def test_stays_near_source(self):
        ramp = np.tile(np.linspace(0.0, 1.0, 64), (64, 1))
        dithered = dither_quantize(ramp, bits=3, seed=1)
        # triangular noise of one quantizer step, then 8-bit rounding
        assert np.max(np.abs(dithered - ramp)) <= 1.0 / 7.0 + 0.5 / 255.0 + 1e-12
        assert np.all((dithered >= 0.0) & (dithered <= 1.0))

    def test_deterministic(self):
        arr = np.random.default_rng(4).random((32, 32))
        assert np.array_equal(dither_quantize(arr, 4, seed=9),
                              dither_quantize(arr, 4, seed=9))


class TestDataset:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(count_per_class=0)
        with pytest.raises(ValueError):
            SynthConfig(bits=(1,))
        with pytest.raises(ValueError):
            SynthConfig(kinds=("texture",))   # needs a smooth kind

    def test_counts_and_balance(self, corpus):
        assert len(corpus.records) == 60
        counts = corpus.class_counts()
        assert counts[0] == 30 and counts[1] == 30

    def test_positives_use_smooth_kinds_only(self, corpus):
        for rec in corpus.records:
            if rec.label == 1:
                assert rec.kind in SMOOTH_KINDS

    def test_manifest_round_trip(self, corpus):
        loaded = load_manifest(corpus.path)
        assert [r.id for r in loaded.records] == [r.id for r in corpus.records]
        assert [r.seed for r in loaded.records] == [r.seed for r in corpus.records]

    def test_records_regenerate_bit_exactly(self, corpus):
        raw, labels = load_arrays(corpus)
        for i in (0, 17, 31, 59):
            rec = corpus.records[i]
            again = regenerate_record(rec)
            assert np.array_equal(again, raw[i]), rec.id
            assert labels[i] == rec.label

    def test_smooth_positives_less_busy_than_texture(self, corpus):
        raw, _ = load_arrays(corpus)
        pos = [spatial_freq_array(raw[i]).sf
               for i, r in enumerate(corpus.records) if r.label == 1]
        tex = [spatial_freq_array(raw[i]).sf
               for i, r in enumerate(corpus.records) if r.kind == "texture"]
        assert tex, "corpus should contain texture negatives"
        assert np.mean(pos) < np.mean(tex)

    def test_mean_luma_is_not_separable(self, corpus):
        raw, labels = load_arrays(corpus)
        mean_pos = raw[labels == 1].mean(axis=(1, 2))
        mean_neg = raw[labels == 0].mean(axis=(1, 2))
        # class-conditional brightness ranges overlap
        assert max(mean_pos.min(), mean_neg.min()) < min(mean_pos.max(), mean_neg.max())


class TestManifestErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "nope.jsonl")

    def test_bad_json_line(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text('{"id": "a"\n', encoding="ascii")
        with pytest.raises(errors.CorruptDataError):
            load_manifest(p)

    def test_missing_keys(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text(json.dumps({"id": "a", "label": 1}) + "\n", encoding="ascii")
        with pytest.raises(errors.CorruptDataError):
            load_manifest(p)

    def test_bad_label(self, tmp_path):
        p = tmp_path / "m.jsonl"
        rec = {"id": "a", "label": 3, "kind": "texture", "bits": 4,
               "seed": 1, "path": "a.pgm"}
        p.write_text(json.dumps(rec) + "\n", encoding="ascii")
        with pytest.raises(errors.CorruptDataError):
            load_manifest(p)

    def test_empty_manifest(self, tmp_path):
        p = tmp_path / "m.jsonl"
        p.write_text("", encoding="ascii")
        with pytest.raises(errors.CorruptDataError):
            load_manifest(p)
