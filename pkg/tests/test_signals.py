import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from sgda.errors import DataError
from sgda.signals import (
    NormalizationMode,
    NormContext,
    RawSignal,
    SegmentConfig,
    Spectrum,
    Stage,
    apply_normalization,
    db_scale,
    decibel_spectra,
    fft_magnitude,
    format_signal_csv,
    frequency_axis,
    load_signal_csv,
    normalize,
    segment,
    split_channels,
)


def _db(values, freq=None):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    freq = np.arange(values.shape[1], dtype=float) if freq is None else freq
    return Spectrum(values, freq, Stage.DECIBEL)


class TestRawSignal:
    def test_one_dimensional_becomes_column(self):
        s = RawSignal(np.arange(5.0), 10.0)
        assert s.samples.shape == (5, 1)

    def test_rejects_nan(self):
        with pytest.raises(DataError, match="NaN"):
            RawSignal(np.array([1.0, np.nan]), 10.0)

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            RawSignal(np.zeros((0, 1)), 10.0)

    def test_immutable(self):
        s = RawSignal(np.arange(4.0), 10.0)
        with pytest.raises(ValueError):
            s.samples[0, 0] = 9.0


class TestCsv:
    def test_round_trip(self, tmp_path):
        s = RawSignal(np.random.default_rng(0).normal(size=(20, 2)), 100.0, "x")
        path = tmp_path / "x.csv"
        path.write_text(format_signal_csv(s))
        back = load_signal_csv(path, 100.0)
        np.testing.assert_array_equal(back.samples, s.samples)
        assert back.source_id == "x"

    def test_text_row_named(self, tmp_path):
        rows = ["a"] + [str(float(i)) for i in range(5)] + ["oops"] + ["1.0"]
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(DataError, match="row 7"):
            load_signal_csv(path, 10.0)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("1,2\n3,4\n5\n")
        with pytest.raises(DataError, match="row 3 has 1 columns"):
            load_signal_csv(path, 10.0)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("header\n")
        with pytest.raises(DataError, match="no samples"):
            load_signal_csv(path, 10.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_signal_csv(tmp_path / "nope.csv", 10.0)


class TestSegmentation:
    def test_one_second_at_motor_a_rate(self):
        cfg = SegmentConfig.one_second(4098.0)
        assert cfg.segment_len_samples == 4098
        assert cfg.count(4098) == 1
        assert SegmentConfig.one_second(4098.0, overlap=True).step_samples == 2049

    def test_windows_start_at_multiples_of_step(self):
        s = RawSignal(np.arange(10.0), 1.0, "s")
        segs = segment(s, SegmentConfig(4, 3))
        assert [seg.data[0, 0] for seg in segs] == [0.0, 3.0, 6.0]
        assert [seg.index for seg in segs] == [0, 1, 2]

    def test_short_signal(self):
        with pytest.raises(DataError, match="shorter than one segment"):
            segment(RawSignal(np.arange(3.0), 1.0), SegmentConfig(4, 2))

    def test_step_larger_than_length(self):
        with pytest.raises(ValueError, match="must not exceed"):
            SegmentConfig(4, 5)

    def test_count_exhaustive(self):
        for n in range(0, 65):
            for length in range(1, 65):
                for step in range(1, length + 1):
                    assert SegmentConfig(length, step).count(n) == oracles.segment_count(n, length, step)


class TestSpectrum:
    def test_pure_tone_peak(self):
        fs, n = 64.0, 64
        t = np.arange(n) / fs
        seg = segment(RawSignal(np.sin(2 * np.pi * 5 * t), fs), SegmentConfig(n, n))[0]
        spec = fft_magnitude(seg)
        assert spec.n_bins == 33
        assert spec.freq_axis_hz[int(np.argmax(spec.bins[0]))] == 5.0
        assert spec.bins[0, 5] == pytest.approx(n / 2)

    def test_two_sideband_tones(self):
        fs = 4098.0
        t = np.arange(4098) / fs
        x = np.sin(2 * np.pi * 42.7 * t) + np.sin(2 * np.pi * 57.3 * t)
        spec = fft_magnitude(segment(RawSignal(x, fs), SegmentConfig(4098, 4098))[0]).bins[0]
        for f in (42.7, 57.3):
            k = int(round(f))
            # Direct DFT at the nearest bin agrees with the FFT and is a local maximum.
            direct = abs(np.sum(x * np.exp(-2j * np.pi * k * np.arange(4098) / 4098)))
            assert spec[k] == pytest.approx(direct, rel=1e-9)
            assert spec[k] > spec[k - 1] and spec[k] > spec[k + 1]

    def test_frequency_axis(self):
        np.testing.assert_allclose(frequency_axis(8, 8.0), [0, 1, 2, 3, 4])

    def test_db_of_unit_is_zero(self):
        spec = Spectrum(np.array([[1.0, 10.0]]), np.array([0.0, 1.0]), Stage.MAGNITUDE)
        np.testing.assert_allclose(db_scale(spec, 1e-300).bins, [[0.0, 20.0]])

    def test_db_of_zero_is_finite(self):
        spec = Spectrum(np.zeros((1, 3)), np.arange(3.0), Stage.MAGNITUDE)
        assert np.all(db_scale(spec).bins == pytest.approx(-240.0))

    def test_db_needs_magnitude(self):
        with pytest.raises(ValueError, match="magnitude"):
            db_scale(_db([1.0, 2.0]))

    def test_stage_invariant(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            Spectrum(np.array([[1.5]]), np.array([0.0]), Stage.NORMALIZED)


class TestNormalization:
    def test_per_segment_extrema(self):
        out = normalize([_db([-10.0, 0.0, 10.0])], "per")
        np.testing.assert_allclose(out.spectra[0].bins, [[0.0, 0.5, 1.0]])
        assert out.context.mode is NormalizationMode.PER_SEGMENT

    def test_degenerate_flat(self):
        out = normalize([_db([3.0, 3.0, 3.0])], "per")
        np.testing.assert_allclose(out.spectra[0].bins, 0.5)
        assert out.degenerate[0, 0]

    def test_global_uses_shared_extrema(self):
        out = normalize([_db([0.0, 10.0]), _db([5.0, 20.0])], "global")
        np.testing.assert_allclose(out.spectra[0].bins, [[0.0, 0.5]])
        np.testing.assert_allclose(out.spectra[1].bins, [[0.25, 1.0]])
        assert out.context.minima.tolist() == [0.0]
        assert out.context.maxima.tolist() == [20.0]

    def test_global_reuse_clips_and_flags(self):
        ctx = NormContext(NormalizationMode.GLOBAL, np.array([0.0]), np.array([10.0]))
        out = apply_normalization([_db([-5.0, 5.0]), _db([1.0, 2.0])], ctx)
        np.testing.assert_allclose(out.spectra[0].bins, [[0.0, 0.5]])
        assert out.clipped[:, 0].tolist() == [True, False]

    def test_context_round_trip(self):
        ctx = NormContext(NormalizationMode.GLOBAL, np.array([-3.0, 1.0]), np.array([4.0, 9.0]))
        back = NormContext.from_dict(ctx.to_dict())
        assert back.mode is ctx.mode
        np.testing.assert_array_equal(back.minima, ctx.minima)

    def test_needs_decibel(self):
        spec = Spectrum(np.ones((1, 2)), np.arange(2.0), Stage.MAGNITUDE)
        with pytest.raises(ValueError, match="decibel"):
            normalize([spec], "per")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            NormalizationMode.parse("zscore")


class TestChannels:
    def test_split_order(self):
        s = RawSignal(np.random.default_rng(1).normal(size=(32, 3)), 32.0, "m")
        specs = decibel_spectra(s, SegmentConfig(16, 16))
        singles = split_channels(specs)
        assert len(singles) == 6
        np.testing.assert_array_equal(singles[4].bins[0], specs[1].bins[1])


spectra_strategy = arrays(
    np.float64,
    st.tuples(st.integers(1, 3), st.integers(2, 40)),
    elements=st.floats(-200.0, 200.0),
)


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(spectra_strategy, st.sampled_from(["per", "global"]))
    def test_normalized_in_unit_interval(self, values, mode):
        out = normalize([_db(values), _db(values[:, ::-1] * 0.5)], mode)
        for s in out.spectra:
            assert np.all((s.bins >= 0) & (s.bins <= 1))

    @settings(max_examples=150, deadline=None)
    @given(arrays(np.float64, st.integers(2, 50), elements=st.floats(0.0, 1e6)))
    def test_db_monotone(self, mags):
        spec = Spectrum(mags[None, :], np.arange(mags.size, dtype=float), Stage.MAGNITUDE)
        db = db_scale(spec).bins[0]
        order = np.argsort(mags, kind="stable")
        assert np.all(np.diff(db[order]) >= 0)

    @settings(max_examples=100, deadline=None)
    @given(spectra_strategy)
    def test_per_segment_preserves_order(self, values):
        out = normalize([_db(values)], "per").spectra[0].bins
        for row_in, row_out in zip(values, out):
            i, j = np.argmax(row_in), np.argmin(row_in)
            assert row_out[i] >= row_out[j]
