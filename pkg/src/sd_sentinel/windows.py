"""Sliding-window sample extraction and the binary window-dataset format.

Detector inputs are 30-minute crops taken at 1-minute stride from a trace's
spectrogram and power series. A crop centered at minute ``t`` covers columns
``[t-15, t+15)`` and is labeled positive when any SD peak lies within 15
minutes of ``t``. Images are log-scaled then min-max normalized per window;
power vectors are z-scored per window.

Datasets are stored as flat binary files:

    header : magic ``SDDS`` | u32 version | u64 record count   (16 bytes)
    record : u32 center_min | u8 label | 900 x f32 image (row-major)
             | 30 x f32 vector, all little-endian
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import DataError, TraceFormatError
from .preprocess import preprocess
from .spectral import PowerSeries, Spectrogram, power_series, spectrogram
from .trace import EegTrace, SdLabelSet

DATASET_MAGIC = b"SDDS"
DATASET_VERSION = 1
IMAGE_SHAPE = (30, 30)
VECTOR_LEN = 30

_RECORD_DTYPE = np.dtype(
    [
        ("center", "<u4"),
        ("label", "u1"),
        ("image", "<f4", (IMAGE_SHAPE[0] * IMAGE_SHAPE[1],)),
        ("vector", "<f4", (VECTOR_LEN,)),
    ]
)


@dataclass
class WindowSample:
    """One detector input: normalized image + vector, center minute, label."""

    center_min: int
    label: int
    image: np.ndarray   # (30, 30) float32, [0, 1]
    vector: np.ndarray  # (30,) float32, z-scored


def normalize_image(raw: np.ndarray, log_eps: float = 1e-12) -> np.ndarray:
    """Log-scale then stretch to [0, 1]; a constant window maps to all zeros."""
    z = np.log10(np.asarray(raw, dtype=np.float64) + log_eps)
    lo, hi = float(z.min()), float(z.max())
    if hi == lo:
        return np.zeros_like(z, dtype=np.float32)
    return ((z - lo) / (hi - lo)).astype(np.float32)


def normalize_vector(raw: np.ndarray) -> np.ndarray:
    """Per-window z-score; a constant window maps to all zeros."""
    x = np.asarray(raw, dtype=np.float64)
    # ptp, not std: rounding of the mean can leave std tiny but nonzero
    # for identical values, which would z-score a flat window to +-1
    if np.ptp(x) == 0.0:
        return np.zeros_like(x, dtype=np.float32)
    return ((x - x.mean()) / x.std()).astype(np.float32)


def crop_windows(
    spec: Spectrogram,
    power: PowerSeries,
    labels: SdLabelSet | None = None,
    width_min: int = 30,
    log_eps: float = 1e-12,
) -> list[WindowSample]:
    """Cut aligned (image, vector) windows at 1-minute stride.

    Centers run over integer minutes ``[half, T - half]`` where
    ``half = width_min // 2``, giving ``T - width_min + 1`` samples for a
    T-minute trace.
    """
    n_frames = spec.n_frames
    if power.n_frames != n_frames:
        raise DataError(
            f"spectrogram has {n_frames} frames but power series has {power.n_frames}"
        )
    if n_frames < width_min:
        raise DataError(
            f"trace of {n_frames} min cannot host a {width_min}-min window"
        )
    peaks = labels.peaks_min if labels is not None else np.empty(0)
    half = width_min // 2
    out: list[WindowSample] = []
    for t in range(half, n_frames - width_min + half + 1):
        lo = t - half
        image = normalize_image(spec.values[:, lo : lo + width_min], log_eps)
        vector = normalize_vector(power.values[lo : lo + width_min])
        label = int(np.any(np.abs(peaks - t) <= half)) if peaks.size else 0
        out.append(WindowSample(center_min=t, label=label, image=image, vector=vector))
    return out


def featurize(trace: EegTrace, config: RunConfig | None = None) -> tuple[Spectrogram, PowerSeries]:
    """Condition a raw trace and compute its spectrogram and power series."""
    config = config or RunConfig()
    clean = preprocess(trace, config)
    sp = config.spectrogram
    spec = spectrogram(clean, sp.band_low_hz, sp.band_high_hz, sp.n_freq_bins, sp.frame_s)
    power = power_series(clean, sp.power_low_hz, sp.power_high_hz, sp.frame_s)
    return spec, power


def windows_from_trace(
    trace: EegTrace, labels: SdLabelSet | None = None, config: RunConfig | None = None
) -> list[WindowSample]:
    config = config or RunConfig()
    spec, power = featurize(trace, config)
    return crop_windows(spec, power, labels, config.window.width_min, config.window.log_eps)


def stack_windows(samples: list[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(centers u32, labels u8, images f32 (N,30,30), vectors f32 (N,30))."""
    n = len(samples)
    centers = np.array([s.center_min for s in samples], dtype=np.uint32)
    labels = np.array([s.label for s in samples], dtype=np.uint8)
    images = np.zeros((n, *IMAGE_SHAPE), dtype=np.float32)
    vectors = np.zeros((n, VECTOR_LEN), dtype=np.float32)
    for i, s in enumerate(samples):
        images[i] = s.image
        vectors[i] = s.vector
    return centers, labels, images, vectors


def write_window_dataset(samples: list[WindowSample], path: str | Path) -> None:
    for s in samples:
        if s.image.shape != IMAGE_SHAPE or s.vector.shape != (VECTOR_LEN,):
            raise DataError(
                f"dataset records are fixed at {IMAGE_SHAPE} images and "
                f"{VECTOR_LEN}-point vectors, got {s.image.shape} / {s.vector.shape}"
            )
    centers, labels, images, vectors = stack_windows(samples)
    records = np.empty(len(samples), dtype=_RECORD_DTYPE)
    records["center"] = centers
    records["label"] = labels
    records["image"] = images.reshape(len(samples), IMAGE_SHAPE[0] * IMAGE_SHAPE[1])
    records["vector"] = vectors
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<IQ", DATASET_VERSION, len(samples)))
        fh.write(records.tobytes())


def read_window_dataset(path: str | Path) -> list[WindowSample]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16:
        raise TraceFormatError(f"{path.name}: truncated header ({len(blob)} of 16 bytes)")
    if blob[:4] != DATASET_MAGIC:
        raise TraceFormatError(f"{path.name}: bad magic {blob[:4]!r}, expected {DATASET_MAGIC!r}")
    version, count = struct.unpack("<IQ", blob[4:16])
    if version != DATASET_VERSION:
        raise TraceFormatError(f"{path.name}: unsupported version {version}")
    expected = 16 + count * _RECORD_DTYPE.itemsize
    if len(blob) != expected:
        raise TraceFormatError(
            f"{path.name}: expected {expected} bytes for {count} records, "
            f"file ends at byte {len(blob)}"
        )
    records = np.frombuffer(blob, dtype=_RECORD_DTYPE, count=count, offset=16)
    out: list[WindowSample] = []
    for rec in records:
        out.append(
            WindowSample(
                center_min=int(rec["center"]),
                label=int(rec["label"]),
                image=rec["image"].reshape(IMAGE_SHAPE).copy(),
                vector=rec["vector"].copy(),
            )
        )
    return out
