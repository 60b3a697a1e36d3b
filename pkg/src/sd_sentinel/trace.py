"""EEG trace and label containers, their on-disk formats, and a synthetic base signal.

Two trace formats are supported, dispatched on file suffix:

* ``.csv``  -- text, one sample per row, header
  ``time_s,value_uV,fs_hz=<float>,channel=<id>``, LF line endings, UTF-8.
* ``.f32``  -- raw little-endian IEEE-754 float32 samples, no header, with a
  JSON sidecar ``<stem>.meta.json`` holding ``fs_hz``, ``channel`` and
  ``start_time_s``.

Label files are plain text with one line per SD event:
``peak_min`` or ``peak_min,start_min,end_min``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import fanout_rng
from .errors import TraceFormatError

RAW_SUFFIX = ".f32"
CSV_SUFFIX = ".csv"


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(np.asarray(x, dtype=np.float64)))))


@dataclass
class EegTrace:
    """A single-channel EEG recording in microvolts at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0
    channel_id: str = "ch0"

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise TraceFormatError("trace must hold a non-empty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            bad = int(np.flatnonzero(~np.isfinite(self.samples))[0])
            raise TraceFormatError(f"non-finite sample at index {bad}")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise TraceFormatError(f"sample rate must be positive, got {self.sample_rate_hz}")

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def duration_min(self) -> float:
        return self.duration_s / 60.0

    def with_samples(self, samples: np.ndarray) -> "EegTrace":
        return EegTrace(samples, self.sample_rate_hz, self.start_time_s, self.channel_id)


@dataclass
class SdLabelSet:
    """Ground-truth SD annotations: peak minutes, optionally onset/end spans."""

    peaks_min: np.ndarray
    spans_min: list[tuple[float, float] | None] | None = None

    def __post_init__(self) -> None:
        self.peaks_min = np.asarray(self.peaks_min, dtype=np.float64)
        if self.peaks_min.ndim != 1:
            raise TraceFormatError("label peaks must form a 1-D array")
        if self.peaks_min.size and not np.all(np.diff(self.peaks_min) > 0):
            raise TraceFormatError("label peaks must be strictly increasing")
        if self.spans_min is not None:
            if len(self.spans_min) != self.peaks_min.size:
                raise TraceFormatError("span list length must match peak count")
            for peak, span in zip(self.peaks_min, self.spans_min):
                if span is None:
                    continue
                start, end = span
                if not (start <= peak <= end):
                    raise TraceFormatError(
                        f"span [{start}, {end}] does not contain its peak {peak}"
                    )

    def __len__(self) -> int:
        return int(self.peaks_min.size)

    @staticmethod
    def empty() -> "SdLabelSet":
        return SdLabelSet(np.empty(0, dtype=np.float64), [])


# ---------------------------------------------------------------------------
# trace I/O


def write_trace(trace: EegTrace, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == CSV_SUFFIX:
        _write_csv(trace, path)
    elif path.suffix == RAW_SUFFIX:
        _write_rawf32(trace, path)
    else:
        raise TraceFormatError(f"unsupported trace suffix {path.suffix!r} for {path.name}")


def read_trace(path: str | Path) -> EegTrace:
    path = Path(path)
    if path.suffix == CSV_SUFFIX:
        return _read_csv(path)
    if path.suffix == RAW_SUFFIX:
        return _read_rawf32(path)
    raise TraceFormatError(f"unsupported trace suffix {path.suffix!r} for {path.name}")


def _write_csv(trace: EegTrace, path: Path) -> None:
    dt = 1.0 / trace.sample_rate_hz
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"time_s,value_uV,fs_hz={trace.sample_rate_hz!r},channel={trace.channel_id}\n")
        t0 = trace.start_time_s
        for i, v in enumerate(trace.samples):
            fh.write(f"{t0 + i * dt:.6f},{v:.10g}\n")


def _read_csv(path: Path) -> EegTrace:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        tokens = header.split(",")
        if (
            len(tokens) != 4
            or tokens[0] != "time_s"
            or tokens[1] != "value_uV"
            or not tokens[2].startswith("fs_hz=")
            or not tokens[3].startswith("channel=")
        ):
            raise TraceFormatError(f"{path.name}:1: malformed header {header!r}")
        try:
            fs = float(tokens[2][len("fs_hz="):])
        except ValueError as exc:
            raise TraceFormatError(f"{path.name}:1: cannot parse sample rate") from exc
        channel = tokens[3][len("channel="):]

        times: list[float] = []
        values: list[float] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceFormatError(f"{path.name}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                t, v = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise TraceFormatError(f"{path.name}:{lineno}: non-numeric row {line!r}") from exc
            if not math.isfinite(v):
                raise TraceFormatError(f"{path.name}:{lineno}: non-finite sample value")
            if times and t <= times[-1]:
                raise TraceFormatError(f"{path.name}:{lineno}: timestamps not strictly increasing")
            times.append(t)
            values.append(v)

    if not values:
        raise TraceFormatError(f"{path.name}: no samples")
    if len(times) > 1:
        spacing = float(np.median(np.diff(times)))
        if abs(spacing * fs - 1.0) > 0.01:
            raise TraceFormatError(
                f"{path.name}: header rate {fs} Hz disagrees with row spacing {spacing:.6g} s"
            )
    return EegTrace(np.asarray(values), fs, start_time_s=times[0], channel_id=channel)


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def _write_rawf32(trace: EegTrace, path: Path) -> None:
    trace.samples.astype("<f4").tofile(path)
    meta = {
        "fs_hz": trace.sample_rate_hz,
        "channel": trace.channel_id,
        "start_time_s": trace.start_time_s,
    }
    _meta_path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def _read_rawf32(path: Path) -> EegTrace:
    meta_path = _meta_path(path)
    if not meta_path.exists():
        raise TraceFormatError(f"{path.name}: missing sidecar {meta_path.name}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        fs = float(meta["fs_hz"])
        channel = str(meta["channel"])
        start = float(meta["start_time_s"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"{meta_path.name}: malformed sidecar ({exc})") from exc
    raw = np.fromfile(path, dtype="<f4")
    if raw.size == 0:
        raise TraceFormatError(f"{path.name}: no samples")
    if not np.all(np.isfinite(raw)):
        bad = int(np.flatnonzero(~np.isfinite(raw))[0])
        raise TraceFormatError(f"{path.name}: non-finite sample at byte offset {bad * 4}")
    return EegTrace(raw.astype(np.float64), fs, start_time_s=start, channel_id=channel)


# ---------------------------------------------------------------------------
# label I/O


def write_labels(labels: SdLabelSet, path: str | Path) -> None:
    spans = labels.spans_min if labels.spans_min is not None else [None] * len(labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for peak, span in zip(labels.peaks_min, spans):
            if span is None:
                fh.write(f"{peak:.6g}\n")
            else:
                fh.write(f"{peak:.6g},{span[0]:.6g},{span[1]:.6g}\n")


def read_labels(path: str | Path) -> SdLabelSet:
    path = Path(path)
    peaks: list[float] = []
    spans: list[tuple[float, float] | None] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) not in (1, 3):
            raise TraceFormatError(f"{path.name}:{lineno}: expected 1 or 3 fields")
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise TraceFormatError(f"{path.name}:{lineno}: non-numeric label {line!r}") from exc
        peaks.append(row[0])
        spans.append((row[1], row[2]) if len(row) == 3 else None)
    return SdLabelSet(np.asarray(peaks, dtype=np.float64), spans)


# ---------------------------------------------------------------------------
# synthetic base EEG


def synth_base_eeg(
    duration_min: float,
    sample_rate_hz: float = 200.0,
    seed: int = 0,
    delta_peak_hz: float = 1.0,
    rms_uv: float = 20.0,
    am_depth: float = 0.3,
    am_period_min: float | None = None,
) -> EegTrace:
    """Generate an SD-free base EEG: pink noise plus a delta-band rhythm.

    The rhythm is a sinusoid at ``delta_peak_hz`` holding twice the pink-noise
    RMS, waxing and waning on the seconds scale the way delta activity does.
    The default modulation period averages out within a one-minute power
    frame; pass ``am_period_min`` of several minutes or more to impose the
    slow power drift used by nonstationarity stress tests. Fully
    deterministic per seed.
    """
    if duration_min <= 0:
        raise TraceFormatError("duration_min must be positive")
    rng = fanout_rng(seed, "synth-base")
    n = int(round(duration_min * 60.0 * sample_rate_hz))

    # pink noise: white spectrum shaped by 1/sqrt(f) so PSD falls off as 1/f
    n_bins = n // 2 + 1
    spectrum = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate_hz)
    shape = np.zeros(n_bins)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    pink = np.fft.irfft(spectrum * shape, n=n)
    pink /= rms(pink)

    t = np.arange(n) / sample_rate_hz
    phase = rng.uniform(0.0, 2.0 * np.pi)
    if am_period_min is None:
        am_period_min = rng.uniform(0.1, 0.35)
    am_phase = rng.uniform(0.0, 2.0 * np.pi)
    am = 1.0 + am_depth * np.sin(2.0 * np.pi * t / (am_period_min * 60.0) + am_phase)
    osc = am * np.sin(2.0 * np.pi * delta_peak_hz * t + phase)
    osc *= 2.0 / rms(osc)

    samples = pink + osc
    samples -= samples.mean()
    samples *= rms_uv / rms(samples)
    return EegTrace(samples, sample_rate_hz, start_time_s=0.0, channel_id=f"synth{seed}")
