"""Suppression templates, the mixing equation, and dataset synthesis."""

from __future__ import annotations

import json

import numpy as np
import pytest

from sd_sentinel.config import RunConfig, fanout_rng
from sd_sentinel.errors import DataError
from sd_sentinel.preprocess import bandpass_samples, normalize_samples
from sd_sentinel.simulate import (
    AugmentSpec,
    SdTemplate,
    augment_sd,
    draw_placements,
    leaky_integral,
    load_manifest,
    make_dataset,
    _synth_segment,
)
from sd_sentinel.spectral import PowerSeries
from sd_sentinel.trace import EegTrace, read_labels, read_trace, rms, synth_base_eeg
from sd_sentinel.windows import read_window_dataset

FS = 200.0


def normalized_base(minutes: float, seed: int = 0) -> EegTrace:
    trace = synth_base_eeg(minutes, FS, seed=seed)
    return EegTrace(normalize_samples(trace.samples), FS)


def window_rms(trace: EegTrace, lo_min: float, hi_min: float) -> float:
    lo = int(lo_min * 60 * FS)
    hi = int(hi_min * 60 * FS)
    return rms(trace.samples[lo:hi])


class TestSdTemplate:
    def test_profile_shape(self):
        tmpl = SdTemplate(trough_depth=0.2, onset_min=5.0, hold_min=7.5, recovery_min=10.0)
        prof = tmpl.profile(FS)
        assert prof.size == int(22.5 * 60 * FS)
        assert prof[0] == 1.0
        assert prof[-1] == pytest.approx(1.0, abs=1e-3)
        onset_end = int(5.0 * 60 * FS)
        hold_end = int(12.5 * 60 * FS)
        assert prof[onset_end] == pytest.approx(0.2)
        assert np.allclose(prof[onset_end : hold_end + 1], 0.2)
        assert prof.min() == pytest.approx(0.2)
        # linear ramps: halfway down the onset sits halfway in value
        assert prof[onset_end // 2] == pytest.approx(0.6, abs=1e-3)

    def test_peak_offset_is_hold_midpoint(self):
        tmpl = SdTemplate(onset_min=5.0, hold_min=8.0, recovery_min=10.0)
        assert tmpl.peak_offset_min == 9.0
        assert tmpl.total_min == 23.0

    def test_validation(self):
        with pytest.raises(DataError, match="depth"):
            SdTemplate(trough_depth=0.0)
        with pytest.raises(DataError, match="depth"):
            SdTemplate(trough_depth=1.0)
        with pytest.raises(DataError, match="positive"):
            SdTemplate(onset_min=0.0)


class TestAugmentSd:
    def test_zero_mix_collapses_to_filtered_base(self):
        base = normalized_base(60)
        spec = AugmentSpec(alpha=0.0, beta=0.0, sd_placement=[30.0])
        mixed, labels = augment_sd(base, SdTemplate(), spec)
        want = bandpass_samples(base.samples, FS, 0.5, 45.0, 4)
        assert np.array_equal(mixed.samples, want)
        assert list(labels.peaks_min) == [30.0]

    def test_trough_amplitude_ratio(self):
        # at the trough the pre-noise amplitude ratio is (1 + a*d) / (1 + a)
        base = normalized_base(120)
        tmpl = SdTemplate(trough_depth=0.2, onset_min=5.0, hold_min=10.0, recovery_min=10.0)
        spec = AugmentSpec(alpha=0.3, beta=0.0, sd_placement=[60.0])
        mixed, _ = augment_sd(base, tmpl, spec)
        clean, _ = augment_sd(base, tmpl, AugmentSpec(alpha=0.0, sd_placement=[60.0]))
        want = (1.0 + 0.3 * 0.2) / (1.0 + 0.3)
        got = window_rms(mixed, 57, 63) / window_rms(clean, 57, 63)
        assert got == pytest.approx(want, rel=0.02)
        # far from the SD the two traces agree
        far = window_rms(mixed, 10, 25) / window_rms(clean, 10, 25)
        assert far == pytest.approx(1.0, rel=0.02)

    def test_noise_term_weight(self):
        base = normalized_base(40)
        noisy, _ = augment_sd(base, SdTemplate(), AugmentSpec(beta=0.2, seed=4, sd_placement=[]))
        clean, _ = augment_sd(base, SdTemplate(), AugmentSpec(beta=0.0, sd_placement=[]))
        resid = noisy.samples - clean.samples / (1.0 + 0.2)
        # the residual must be exactly the filtered, scaled unit-RMS noise
        noise = fanout_rng(4, "augment-noise").standard_normal(base.n_samples)
        noise /= rms(noise)
        want = bandpass_samples(0.2 * noise / 1.2, FS, 0.5, 45.0, 4)
        assert rms(resid - want) < 1e-9 * rms(want)

    def test_noise_is_seeded(self):
        base = normalized_base(20)
        a, _ = augment_sd(base, SdTemplate(), AugmentSpec(beta=0.1, seed=9, sd_placement=[]))
        b, _ = augment_sd(base, SdTemplate(), AugmentSpec(beta=0.1, seed=9, sd_placement=[]))
        c, _ = augment_sd(base, SdTemplate(), AugmentSpec(beta=0.1, seed=10, sd_placement=[]))
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_overlapping_profiles_combine_by_min(self):
        base = normalized_base(90)
        tmpl = SdTemplate(trough_depth=0.2)
        spec = AugmentSpec(alpha=0.3, sd_placement=[40.0, 45.0])
        mixed, labels = augment_sd(base, tmpl, spec)
        clean, _ = augment_sd(base, tmpl, AugmentSpec(alpha=0.0, sd_placement=[40.0]))
        # overlap region still bottoms out at depth, never deeper
        got = window_rms(mixed, 41, 44) / window_rms(clean, 41, 44)
        assert got == pytest.approx((1.0 + 0.3 * 0.2) / 1.3, rel=0.02)
        assert list(labels.peaks_min) == [40.0, 45.0]

    def test_unnormalized_base_rejected(self):
        base = normalized_base(20)
        loud = EegTrace(base.samples * 2.0, FS)
        with pytest.raises(DataError, match="normalized"):
            augment_sd(loud, SdTemplate(), AugmentSpec(sd_placement=[10.0]))

    def test_placement_outside_trace_rejected(self):
        base = normalized_base(30)
        with pytest.raises(DataError, match="outside"):
            augment_sd(base, SdTemplate(), AugmentSpec(sd_placement=[300.0]))

    def test_template_count_mismatch_rejected(self):
        base = normalized_base(30)
        with pytest.raises(DataError, match="placements"):
            augment_sd(base, [SdTemplate(), SdTemplate()], AugmentSpec(sd_placement=[15.0]))

    def test_envelope_source_trace(self):
        # rectified source envelope becomes the multiplier; the label lands
        # on the minute with the deepest suppression
        n = int(15 * 60 * FS)
        env = np.ones(n)
        env[int(6 * 60 * FS) : int(7 * 60 * FS)] = 0.2
        signs = np.where(fanout_rng(0, "signs").random(n) < 0.5, -1.0, 1.0)
        source = EegTrace(env * signs, FS)
        base = normalized_base(15)
        mixed, labels = augment_sd(base, source, AugmentSpec(alpha=0.5))
        assert list(labels.peaks_min) == [6.5]
        clean, _ = augment_sd(base, SdTemplate(), AugmentSpec(alpha=0.0, sd_placement=[]))
        got = window_rms(mixed, 6.2, 6.8) / window_rms(clean, 6.2, 6.8)
        assert got == pytest.approx((1.0 + 0.5 * 0.2) / 1.5, rel=0.03)

    def test_envelope_rate_mismatch_rejected(self):
        source = EegTrace(np.ones(1000), 128.0)
        with pytest.raises(DataError, match="rate"):
            augment_sd(normalized_base(15), source, AugmentSpec())

    def test_spec_validation(self):
        with pytest.raises(DataError, match="alpha"):
            AugmentSpec(alpha=-0.1)
        with pytest.raises(DataError, match="beta"):
            AugmentSpec(beta=float("nan"))


class TestLeakyIntegral:
    def test_recurrence(self, rng):
        p = rng.random(50)
        y = leaky_integral(p, tau_s=90.0, dt_s=60.0)
        decay = np.exp(-60.0 / 90.0)
        assert y[0] == pytest.approx(p[0] * 60.0)
        for t in range(1, 50):
            assert y[t] == pytest.approx(y[t - 1] * decay + p[t] * 60.0, rel=1e-12)

    def test_constant_input_steady_state(self):
        y = leaky_integral(np.full(400, 2.5), tau_s=60.0, dt_s=60.0)
        want = 2.5 * 60.0 / (1.0 - np.exp(-1.0))
        assert y[-1] == pytest.approx(want, rel=1e-10)

    def test_power_series_uses_frame_step(self):
        power = PowerSeries(values=np.ones(20), band_low_hz=0.5, band_high_hz=45.0, frame_s=30.0)
        y = leaky_integral(power, tau_s=60.0)
        assert y[0] == pytest.approx(30.0)

    def test_invalid_tau_rejected(self):
        with pytest.raises(DataError, match="positive"):
            leaky_integral(np.ones(5), tau_s=0.0)


class TestDrawPlacements:
    def test_margins_and_gaps(self):
        for seed in range(50):
            peaks = draw_placements(fanout_rng(seed, "p"), 600.0, 0.5)
            assert all(20.0 <= p <= 580.0 for p in peaks)
            assert all(b - a >= 35.0 for a, b in zip(peaks, peaks[1:]))
            assert peaks == sorted(peaks)

    def test_poisson_mean(self):
        counts = [
            len(draw_placements(fanout_rng(seed, "q"), 600.0, 0.5)) for seed in range(200)
        ]
        # lambda = 5; the sample mean over 200 draws stays within 3 sigma
        assert abs(np.mean(counts) - 5.0) < 3.0 * np.sqrt(5.0 / 200.0) + 0.2

    def test_zero_rate_and_short_trace(self):
        assert draw_placements(fanout_rng(0, "r"), 600.0, 0.0) == []
        assert draw_placements(fanout_rng(0, "r"), 30.0, 0.5) == []


class TestSynthSegment:
    def small_config(self) -> RunConfig:
        cfg = RunConfig()
        cfg.seed = 5
        cfg.simulate.segment_hours = 1.0
        return cfg

    def test_deterministic_per_key(self):
        cfg = self.small_config()
        t1, l1, info1 = _synth_segment(cfg, "train", 0)
        t2, l2, info2 = _synth_segment(cfg, "train", 0)
        assert np.array_equal(t1.samples, t2.samples)
        assert np.array_equal(l1.peaks_min, l2.peaks_min)
        assert info1 == info2

    def test_distinct_across_split_and_index(self):
        cfg = self.small_config()
        t0, _, _ = _synth_segment(cfg, "train", 0)
        t1, _, _ = _synth_segment(cfg, "train", 1)
        tt, _, _ = _synth_segment(cfg, "test", 0)
        assert not np.array_equal(t0.samples, t1.samples)
        assert not np.array_equal(t0.samples, tt.samples)

    def test_info_matches_labels(self):
        cfg = self.small_config()
        _, labels, info = _synth_segment(cfg, "test", 3)
        assert info["n_sd"] == len(labels)
        assert 0.0 <= info["alpha"] <= 0.3
        assert 0.0 <= info["beta"] <= 0.2


class TestMakeDataset:
    def test_tiny_end_to_end(self, tmp_path):
        cfg = RunConfig()
        cfg.seed = 11
        cfg.simulate.segment_hours = 1.0
        cfg.simulate.train_hours = 2.0
        cfg.simulate.test_hours = 1.0
        manifest = make_dataset(cfg, tmp_path)

        on_disk = load_manifest(tmp_path / "manifest.json")
        assert on_disk == manifest
        assert set(manifest["splits"]) == {"train", "test"}
        assert len(manifest["splits"]["train"]["segments"]) == 2
        assert len(manifest["splits"]["test"]["segments"]) == 1

        for split in ("train", "test"):
            entry = manifest["splits"][split]
            windows = read_window_dataset(tmp_path / entry["windows"])
            # 60-minute segments give 31 windows each
            assert len(windows) == 31 * len(entry["segments"])
            for seg in entry["segments"]:
                trace = read_trace(tmp_path / seg["trace"])
                labels = read_labels(tmp_path / seg["labels"])
                assert trace.duration_min == pytest.approx(60.0)
                assert len(labels) == seg["n_sd"]

        a = read_trace(tmp_path / manifest["splits"]["train"]["segments"][0]["trace"])
        b = read_trace(tmp_path / manifest["splits"]["test"]["segments"][0]["trace"])
        assert not np.array_equal(a.samples, b.samples)

    def test_manifest_errors(self, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(DataError, match="malformed"):
            load_manifest(bad)
        bad.write_text(json.dumps({"sample_rate_hz": 200.0}), encoding="utf-8")
        with pytest.raises(DataError, match="splits"):
            load_manifest(bad)
