"""Synthetic SD injection and desk-scale dataset construction.

An SD suppresses cortical activity for tens of minutes. Augmentation models
this as a multiplicative envelope on a normalized SD-free trace:

    mixed = (base * (1 + alpha * m) / (1 + alpha) + beta * noise) / (1 + beta)

where ``m`` is either a parametric suppression profile (1 -> trough depth
-> 1, built from linear onset, flat hold, linear recovery) or the rectified
envelope of a real SD-carrying trace, ``noise`` is unit-RMS white Gaussian,
and the result is band-pass filtered. With alpha = beta = 0 the mix reduces
to the filtered base exactly; at the trough the pre-noise amplitude ratio is
(1 + alpha * depth) / (1 + alpha).

Datasets are built per split from disjoint seeded segments, each with its own
slow power-offset modulation, Poisson-placed SDs, per-SD template draws, and
per-segment alpha/beta draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import lfilter

from .config import BandpassConfig, RunConfig, fanout_rng, fanout_seed
from .errors import DataError
from .preprocess import bandpass_samples, normalize_samples
from .spectral import PowerSeries
from .trace import EegTrace, SdLabelSet, rms, synth_base_eeg, write_labels, write_trace
from .windows import windows_from_trace, write_window_dataset


@dataclass
class SdTemplate:
    """Parametric suppression profile in (0, 1], starting and ending at 1.

    Linear onset ramp 1 -> depth over ``onset_min``, flat hold at ``depth``
    for ``hold_min``, linear recovery depth -> 1 over ``recovery_min``.
    """

    trough_depth: float = 0.2
    onset_min: float = 5.0
    hold_min: float = 7.5
    recovery_min: float = 10.0

    def __post_init__(self) -> None:
        if not (0.0 < self.trough_depth < 1.0):
            raise DataError(f"trough depth must lie in (0, 1), got {self.trough_depth}")
        if min(self.onset_min, self.hold_min, self.recovery_min) <= 0:
            raise DataError("template phases must have positive duration")

    @property
    def total_min(self) -> float:
        return self.onset_min + self.hold_min + self.recovery_min

    @property
    def peak_offset_min(self) -> float:
        """Minutes from profile start to the suppression minimum (hold midpoint)."""
        return self.onset_min + self.hold_min / 2.0

    def profile(self, sample_rate_hz: float) -> np.ndarray:
        """Per-sample multiplier array over the template's full duration."""
        n = int(round(self.total_min * 60.0 * sample_rate_hz))
        t = np.arange(n) / sample_rate_hz / 60.0
        breaks = [0.0, self.onset_min, self.onset_min + self.hold_min, self.total_min]
        vals = [1.0, self.trough_depth, self.trough_depth, 1.0]
        return np.interp(t, breaks, vals)


@dataclass
class AugmentSpec:
    """Mixing parameters for one augmentation run."""

    alpha: float = 0.0
    beta: float = 0.0
    seed: int = 0
    sd_placement: list[float] = field(default_factory=list)  # peak minutes
    bandpass: BandpassConfig = field(default_factory=BandpassConfig)
    envelope_smoothing_s: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha and np.isfinite(self.alpha)):
            raise DataError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (0.0 <= self.beta and np.isfinite(self.beta)):
            raise DataError(f"beta must be finite and >= 0, got {self.beta}")


def _check_normalized(x: np.ndarray) -> None:
    r = rms(x)
    if abs(r - 1.0) > 1e-3 or abs(float(np.mean(x))) > 1e-3:
        raise DataError(
            f"base trace must be normalized to zero mean / unit RMS before mixing "
            f"(mean={float(np.mean(x)):.3g}, rms={r:.3g})"
        )


def _profile_from_templates(
    templates: list[SdTemplate],
    placements: list[float],
    n: int,
    fs: float,
    duration_min: float,
) -> tuple[np.ndarray, SdLabelSet]:
    if len(templates) != len(placements):
        raise DataError(
            f"{len(placements)} placements but {len(templates)} templates"
        )
    order = np.argsort(placements)
    m = np.ones(n)
    peaks: list[float] = []
    spans: list[tuple[float, float] | None] = []
    for k in order:
        tmpl, peak_min = templates[int(k)], float(placements[int(k)])
        prof = tmpl.profile(fs)
        start = int(round((peak_min - tmpl.peak_offset_min) * 60.0 * fs))
        src_lo = max(0, -start)
        dst_lo = max(0, start)
        length = min(prof.size - src_lo, n - dst_lo)
        if length <= 0:
            raise DataError(f"SD placed at minute {peak_min} lies outside the trace")
        dst = slice(dst_lo, dst_lo + length)
        m[dst] = np.minimum(m[dst], prof[src_lo : src_lo + length])
        peaks.append(peak_min)
        spans.append(
            (
                max(0.0, peak_min - tmpl.peak_offset_min),
                min(duration_min, peak_min - tmpl.peak_offset_min + tmpl.total_min),
            )
        )
    return m, SdLabelSet(np.asarray(peaks), spans)


def _profile_from_trace(
    source: EegTrace, base: EegTrace, smoothing_s: float
) -> tuple[np.ndarray, SdLabelSet]:
    if abs(source.sample_rate_hz - base.sample_rate_hz) > 1e-9:
        raise DataError(
            f"SD source rate {source.sample_rate_hz} Hz != base rate {base.sample_rate_hz} Hz"
        )
    env = np.abs(source.samples)
    if smoothing_s > 0:
        size = max(1, int(round(smoothing_s * source.sample_rate_hz)))
        env = np.sqrt(uniform_filter1d(np.square(env), size=size, mode="nearest"))
    m = np.resize(env, base.n_samples)  # tile or truncate to the base length
    # label the deepest suppression: minute with the lowest mean envelope
    per_min = int(round(60.0 * base.sample_rate_hz))
    n_min = m.size // per_min
    minute_means = m[: n_min * per_min].reshape(n_min, per_min).mean(axis=1)
    peak = float(np.argmin(minute_means)) + 0.5
    return m, SdLabelSet(np.asarray([peak]), [None])


def augment_sd(
    base: EegTrace,
    sd: SdTemplate | list[SdTemplate] | EegTrace,
    spec: AugmentSpec,
) -> tuple[EegTrace, SdLabelSet]:
    """Inject SD suppression into a normalized SD-free trace.

    ``sd`` is a template (reused for every placement in ``spec``), a list of
    templates matched one-to-one with placements, or a normalized SD-carrying
    trace whose rectified envelope is used directly.
    """
    _check_normalized(base.samples)
    fs = base.sample_rate_hz
    n = base.n_samples

    if isinstance(sd, EegTrace):
        m, labels = _profile_from_trace(sd, base, spec.envelope_smoothing_s)
    else:
        templates = [sd] * len(spec.sd_placement) if isinstance(sd, SdTemplate) else list(sd)
        m, labels = _profile_from_templates(
            templates, list(spec.sd_placement), n, fs, base.duration_min
        )

    mixed = base.samples * (1.0 + spec.alpha * m) / (1.0 + spec.alpha)
    if spec.beta > 0.0:
        noise = fanout_rng(spec.seed, "augment-noise").standard_normal(n)
        noise /= rms(noise)
        mixed = mixed + spec.beta * noise
    mixed = mixed / (1.0 + spec.beta)
    bp = spec.bandpass
    out = bandpass_samples(mixed, fs, bp.low_hz, bp.high_hz, bp.order)
    trace = EegTrace(out, fs, base.start_time_s, base.channel_id)
    return trace, labels


def leaky_integral(power: PowerSeries | np.ndarray, tau_s: float = 60.0, dt_s: float | None = None) -> np.ndarray:
    """Leaky accumulation of per-frame power: y[t] = y[t-1]*exp(-dt/tau) + p[t]*dt.

    For constant power P this converges to P*dt / (1 - exp(-dt/tau)).
    """
    if isinstance(power, PowerSeries):
        values = power.values
        dt = power.frame_s if dt_s is None else dt_s
    else:
        values = np.asarray(power, dtype=np.float64)
        dt = 60.0 if dt_s is None else dt_s
    if tau_s <= 0 or dt <= 0:
        raise DataError("tau_s and dt_s must be positive")
    decay = float(np.exp(-dt / tau_s))
    return lfilter([dt], [1.0, -decay], values)


# ---------------------------------------------------------------------------
# dataset construction


def draw_placements(
    rng: np.random.Generator,
    duration_min: float,
    rate_per_h: float,
    edge_margin_min: float = 20.0,
    min_gap_min: float = 35.0,
) -> list[float]:
    """Poisson-count SD peak placement with edge margins and a minimum gap."""
    count = int(rng.poisson(rate_per_h * duration_min / 60.0)) if rate_per_h > 0 else 0
    lo, hi = edge_margin_min, duration_min - edge_margin_min
    if hi <= lo:
        return []
    peaks: list[float] = []
    for _ in range(count):
        for _attempt in range(400):
            c = float(rng.uniform(lo, hi))
            if all(abs(c - p) >= min_gap_min for p in peaks):
                peaks.append(c)
                break
    return sorted(peaks)


def _synth_segment(config: RunConfig, split: str, index: int) -> tuple[EegTrace, SdLabelSet, dict]:
    """One seeded segment: offset-modulated base + Poisson SDs, fully derived
    from (config.seed, split, index)."""
    sim = config.simulate
    fs = sim.sample_rate_hz
    seg_min = sim.segment_hours * 60.0
    base_seed = int(fanout_seed(config.seed, "sim-base", split, index).generate_state(1)[0])
    rng = fanout_rng(config.seed, "sim-params", split, index)

    base = synth_base_eeg(seg_min, fs, seed=base_seed)
    period_min = float(rng.uniform(sim.offset_period_min_min, sim.offset_period_max_min))
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    t = np.arange(base.n_samples) / fs
    envelope = 1.0 + sim.offset_depth * np.sin(2.0 * np.pi * t / (period_min * 60.0) + phase)
    samples = normalize_samples(base.samples * envelope)
    base = EegTrace(samples, fs, channel_id=f"{split}{index:03d}")

    placements = draw_placements(rng, seg_min, sim.sd_rate_per_h)
    templates = [
        SdTemplate(
            trough_depth=float(rng.uniform(sim.trough_depth_min, sim.trough_depth_max)),
            onset_min=sim.onset_min,
            hold_min=float(rng.uniform(sim.hold_min_min, sim.hold_min_max)),
            recovery_min=sim.recovery_min,
        )
        for _ in placements
    ]
    alpha = float(rng.uniform(sim.alpha_min, sim.alpha_max))
    beta = float(rng.uniform(sim.beta_min, sim.beta_max))
    noise_seed = int(fanout_seed(config.seed, "sim-noise", split, index).generate_state(1)[0])
    spec = AugmentSpec(
        alpha=alpha,
        beta=beta,
        seed=noise_seed,
        sd_placement=placements,
        bandpass=config.bandpass,
        envelope_smoothing_s=sim.envelope_smoothing_s,
    )
    trace, labels = augment_sd(base, templates, spec)
    info = {
        "n_sd": len(labels),
        "alpha": alpha,
        "beta": beta,
        "duration_min": seg_min,
    }
    return trace, labels, info


def make_dataset(
    config: RunConfig,
    out_dir: str | Path,
    splits: tuple[str, ...] = ("train", "test"),
) -> dict:
    """Generate seeded train/test segments, window datasets, and a manifest.

    Segment seeds fan out from (seed, split, index), so train and test draw
    from disjoint random streams. Returns the manifest dict, which is also
    written to ``manifest.json`` with paths relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = config.simulate
    manifest: dict = {"sample_rate_hz": sim.sample_rate_hz, "splits": {}}
    for split in splits:
        hours = sim.train_hours if split == "train" else sim.test_hours
        n_segments = max(1, int(round(hours / sim.segment_hours)))
        split_dir = out_dir / split
        split_dir.mkdir(exist_ok=True)
        segments = []
        all_windows = []
        for i in range(n_segments):
            trace, labels, info = _synth_segment(config, split, i)
            trace_path = split_dir / f"seg_{i:03d}.f32"
            label_path = split_dir / f"seg_{i:03d}.labels.txt"
            write_trace(trace, trace_path)
            write_labels(labels, label_path)
            all_windows.extend(windows_from_trace(trace, labels, config))
            segments.append(
                {
                    "trace": str(trace_path.relative_to(out_dir)),
                    "labels": str(label_path.relative_to(out_dir)),
                    **info,
                }
            )
        windows_path = out_dir / f"{split}_windows.sdds"
        write_window_dataset(all_windows, windows_path)
        manifest["splits"][split] = {
            "windows": windows_path.name,
            "segments": segments,
        }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path.name}: malformed manifest ({exc})") from exc
    if "splits" not in manifest:
        raise DataError(f"{path.name}: manifest has no 'splits' entry")
    return manifest
