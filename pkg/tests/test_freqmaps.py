"""Frequency decomposition: Sobel magnitude maps and the smoothing solver."""

import numpy as np
import pytest

from fsband import errors
from fsband.freqmaps import (
    LFMConfig,
    SOBEL_X,
    SOBEL_Y,
    compute_freq_stacks,
    dump_map_png,
    hfm,
    hfm_array,
    lfm,
    lfm_array,
    lfm_energy,
    lfm_energy_arrays,
)
from fsband.imgcore import Patch, load_image


def step_image(side=24):
    img = np.zeros((side, side))
    img[:, side // 2:] = 1.0
    return img


class TestHFM:
    def test_kernel_is_isotropic(self):
        assert SOBEL_X[1, 2] == pytest.approx(np.sqrt(2.0), abs=0)
        assert np.array_equal(SOBEL_Y, SOBEL_X.T)

    def test_constant_patch_is_silent(self):
        assert np.all(hfm_array(np.full((16, 16), 0.37)) == 0.0)

    def test_step_edge_magnitude(self):
        out = hfm_array(step_image())
        # the columns flanking the step see the full one-sided kernel mass
        assert np.max(out) == pytest.approx(2.0 + np.sqrt(2.0), abs=1e-12)
        # the flat halves are silent up to accumulation round-off
        assert np.all(out[:, :10] == 0.0)
        assert np.max(out[:, 14:]) < 1e-12

    def test_horizontal_step_matches_vertical(self):
        img = step_image()
        assert np.allclose(hfm_array(img.T), hfm_array(img).T)

    def test_ramp_interior_is_constant(self):
        ramp = np.tile(np.linspace(0.0, 1.0, 16), (16, 1))
        out = hfm_array(ramp)
        interior = out[1:-1, 1:-1]
        assert np.allclose(interior, interior[0, 0], atol=1e-12)
        # 2 * (2 + sqrt(2)) * per-column increment
        assert interior[0, 0] == pytest.approx(2.0 * (2.0 + np.sqrt(2.0)) / 15.0)

    def test_patch_wrapper(self):
        rng = np.random.default_rng(0)
        p = Patch.from_array(rng.random((16, 16)))
        assert np.array_equal(hfm(p).data, hfm_array(p.data))
        assert np.all(hfm(p).data >= 0.0)


class TestLFMConfig:
    @pytest.mark.parametrize(
        "bad",
        [
            dict(alpha=0.0),
            dict(beta=-1.0),
            dict(iterations=0),
            dict(tol=0.0),
            dict(edge_width=0.0),
        ],
    )
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ValueError):
            LFMConfig(**bad)

    def test_defaults(self):
        cfg = LFMConfig()
        assert (cfg.alpha, cfg.beta) == (2.0, 0.02)
        assert cfg.iterations == 60


class TestLFM:
    def test_constant_patch_is_a_fixed_point(self):
        # fixed point up to division round-off in the sweep updates
        const = np.full((16, 16), 0.6)
        out = lfm_array(const, LFMConfig(iterations=5))
        assert np.max(np.abs(out.data - const)) < 1e-14
        assert np.max(out.edge_field) < 1e-14

    def test_rejects_non_finite(self):
        bad = np.zeros((16, 16))
        bad[3, 3] = np.inf
        with pytest.raises(errors.NonFiniteInputError):
            lfm_array(bad)

    def test_energy_descends_on_noise(self):
        rng = np.random.default_rng(3)
        noisy = np.clip(0.5 + 0.2 * rng.standard_normal((24, 24)), 0.0, 1.0)
        out = lfm_array(noisy, LFMConfig(iterations=20), record_energy=True)
        trace = np.asarray(out.energy_trace)
        assert trace.size >= 2
        assert np.all(np.diff(trace) <= 1e-9)
        assert trace[-1] < trace[0]

    def test_no_trace_unless_asked(self):
        out = lfm_array(np.full((16, 16), 0.2), LFMConfig(iterations=2))
        assert out.energy_trace is None

    def test_smoothing_reduces_total_variation(self):
        rng = np.random.default_rng(5)
        noisy = np.clip(0.5 + 0.2 * rng.standard_normal((24, 24)), 0.0, 1.0)
        out = lfm_array(noisy)

        def tv(a):
            return float(np.abs(np.diff(a, axis=0)).sum() + np.abs(np.diff(a, axis=1)).sum())

        assert tv(out.data) < tv(noisy)
        assert np.all((out.data >= 0.0) & (out.data <= 1.0))

    def test_step_survives_as_an_edge_ridge(self):
        out = lfm_array(step_image())
        # the edge field peaks along the column whose forward difference
        # crosses the step, and the smoothed map keeps both plateaus
        ridge_col = np.unravel_index(np.argmax(out.edge_field), out.edge_field.shape)[1]
        assert ridge_col in (11, 12)
        assert np.max(out.edge_field) > 0.5
        assert np.all(out.edge_field < 1.0)
        assert np.mean(out.data[:, :8]) < 0.05
        assert np.mean(out.data[:, -8:]) > 0.95

    def test_energy_wrapper_matches_arrays(self):
        rng = np.random.default_rng(7)
        patch = Patch.from_array(rng.random((16, 16)))
        cfg = LFMConfig(iterations=10)
        out = lfm(patch, cfg)
        want = lfm_energy_arrays(patch.data, out.data, out.edge_field, cfg)
        assert lfm_energy(patch, out, cfg) == pytest.approx(want, abs=0)
        assert want >= 0.0

    def test_energy_shape_guard(self):
        cfg = LFMConfig()
        with pytest.raises(errors.ShapeMismatchError):
            lfm_energy_arrays(np.zeros((8, 8)), np.zeros((8, 8)), np.zeros((4, 4)), cfg)


class TestStacks:
    def test_shapes_and_ranges(self):
        rng = np.random.default_rng(11)
        pat = rng.random((5, 16, 16))
        hf, lf = compute_freq_stacks(pat, LFMConfig(iterations=8))
        assert hf.shape == pat.shape and lf.shape == pat.shape
        assert np.all(hf >= 0.0)
        assert np.all((lf >= 0.0) & (lf <= 1.0))

    def test_parallel_matches_serial(self):
        rng = np.random.default_rng(12)
        pat = rng.random((6, 16, 16))
        cfg = LFMConfig(iterations=8)
        hf1, lf1 = compute_freq_stacks(pat, cfg, jobs=1)
        hf2, lf2 = compute_freq_stacks(pat, cfg, jobs=2)
        assert np.array_equal(hf1, hf2)
        assert np.array_equal(lf1, lf2)

    def test_rejects_single_patch_shape(self):
        with pytest.raises(errors.ShapeMismatchError):
            compute_freq_stacks(np.zeros((16, 16)))


class TestDump:
    def test_writes_png_and_sidecar(self, tmp_path):
        rng = np.random.default_rng(13)
        data = rng.random((16, 16)) * 3.0
        target = tmp_path / "map.png"
        dump_map_png(data, target)
        assert target.is_file()
        sidecar = tmp_path / "map.png.txt"
        text = sidecar.read_text(encoding="ascii")
        assert f"min={float(data.min())!r}" in text
        assert f"max={float(data.max())!r}" in text
        img = load_image(target)
        assert img.width == 16 and img.height == 16

    def test_flat_map_dumps_zeros(self, tmp_path):
        target = tmp_path / "flat.png"
        dump_map_png(np.full((16, 16), 2.5), target)
        img = load_image(target)
        assert np.all(img.data == 0.0)
