"""Short-time spectral features: spectrogram, band power series, persistence.

A trace is cut into non-overlapping frames (60 s by default, so one frame per
minute), each frame is Hanning-windowed and Fourier-transformed, and the
squared magnitudes are normalized into a power spectral density:

    psd[k] = |F[k]|^2 / (sum(h^2) * N)

All downstream features are relative, so the one-sided spectrum is used
without doubling interior bins. The frequency-restricted spectrogram keeps
only the raw FFT bins inside a narrow band and averages them into a fixed
number of equal-width display bands; the power series sums the PSD over a
wide band per frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .trace import EegTrace


@dataclass
class Spectrogram:
    """Band-aggregated PSD matrix: rows are frequency bands, columns minutes."""

    values: np.ndarray          # (n_bands, n_frames)
    band_edges_hz: np.ndarray   # (n_bands + 1,)
    frame_s: float

    @property
    def n_bands(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[1])


@dataclass
class PowerSeries:
    """Total in-band power per frame."""

    values: np.ndarray          # (n_frames,)
    band_low_hz: float
    band_high_hz: float
    frame_s: float

    @property
    def n_frames(self) -> int:
        return int(self.values.size)


@dataclass
class PersistenceSpectrum:
    """Occupancy histogram of per-frame band power, plus its power marginal."""

    counts: np.ndarray          # (n_bands, n_power_bins) int64
    freq_edges_hz: np.ndarray   # (n_bands + 1,)
    power_edges_log10: np.ndarray
    band_mean_power: np.ndarray  # (n_bands,)

    @property
    def peak_band_index(self) -> int:
        return int(np.argmax(self.band_mean_power))

    @property
    def peak_frequency_hz(self) -> float:
        i = self.peak_band_index
        return float(0.5 * (self.freq_edges_hz[i] + self.freq_edges_hz[i + 1]))


def stft_frame(segment: np.ndarray) -> np.ndarray:
    """Full complex DFT of one Hanning-windowed frame."""
    segment = np.asarray(segment, dtype=np.float64)
    if segment.ndim != 1 or segment.size < 2:
        raise DegenerateInputError("stft_frame needs a 1-D segment of at least 2 samples")
    return np.fft.fft(segment * np.hanning(segment.size))


def _frame_matrix(trace: EegTrace, frame_s: float) -> np.ndarray:
    frame_len = int(round(frame_s * trace.sample_rate_hz))
    if frame_len < 2:
        raise DegenerateInputError(f"frame of {frame_s} s is too short at {trace.sample_rate_hz} Hz")
    n_frames = trace.n_samples // frame_len
    if n_frames == 0:
        raise DegenerateInputError(
            f"trace of {trace.duration_s:.1f} s is shorter than one {frame_s:.0f} s frame"
        )
    return trace.samples[: n_frames * frame_len].reshape(n_frames, frame_len)


def _frame_psd(trace: EegTrace, frame_s: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD per frame: (freqs, psd matrix of shape (n_frames, n_bins))."""
    frames = _frame_matrix(trace, frame_s)
    window = np.hanning(frames.shape[1])
    norm = float(np.sum(window * window)) * frames.shape[1]
    spectra = np.fft.rfft(frames * window, axis=1)
    psd = (spectra.real**2 + spectra.imag**2) / norm
    freqs = np.fft.rfftfreq(frames.shape[1], d=1.0 / trace.sample_rate_hz)
    return freqs, psd


def spectrogram(
    trace: EegTrace,
    band_low_hz: float = 0.5,
    band_high_hz: float = 1.85,
    n_freq_bins: int = 30,
    frame_s: float = 60.0,
) -> Spectrogram:
    """Frequency-restricted spectrogram with equal-width mean-aggregated bands.

    Raw FFT bins with band_low_hz <= f <= band_high_hz are averaged into
    ``n_freq_bins`` bands. Every band must capture at least one raw bin, i.e.
    the band grid cannot be finer than the frame's FFT resolution.
    """
    freqs, psd = _frame_psd(trace, frame_s)
    sel = np.flatnonzero((freqs >= band_low_hz) & (freqs <= band_high_hz))
    width = (band_high_hz - band_low_hz) / n_freq_bins
    if sel.size == 0:
        raise DegenerateInputError(
            f"no FFT bins inside [{band_low_hz}, {band_high_hz}] Hz at resolution "
            f"{freqs[1] - freqs[0]:.6g} Hz"
        )
    band_idx = np.minimum(
        ((freqs[sel] - band_low_hz) / width).astype(np.int64), n_freq_bins - 1
    )
    counts = np.bincount(band_idx, minlength=n_freq_bins)
    if np.any(counts == 0):
        raise DegenerateInputError(
            f"{n_freq_bins} bands over [{band_low_hz}, {band_high_hz}] Hz are finer than "
            f"the FFT resolution {freqs[1] - freqs[0]:.6g} Hz"
        )
    # bins are frequency-sorted, so each band is a contiguous run
    boundaries = np.searchsorted(band_idx, np.arange(n_freq_bins))
    sums = np.add.reduceat(psd[:, sel], boundaries, axis=1)
    values = (sums / counts).T  # (n_bands, n_frames)
    edges = band_low_hz + width * np.arange(n_freq_bins + 1)
    return Spectrogram(values=values, band_edges_hz=edges, frame_s=frame_s)


def power_series(
    trace: EegTrace,
    band_low_hz: float = 0.5,
    band_high_hz: float = 45.0,
    frame_s: float = 60.0,
) -> PowerSeries:
    """Total PSD per frame over a wide band (the temporal power vector)."""
    freqs, psd = _frame_psd(trace, frame_s)
    mask = (freqs >= band_low_hz) & (freqs <= band_high_hz)
    if not mask.any():
        raise DegenerateInputError(f"no FFT bins inside [{band_low_hz}, {band_high_hz}] Hz")
    return PowerSeries(
        values=psd[:, mask].sum(axis=1),
        band_low_hz=band_low_hz,
        band_high_hz=band_high_hz,
        frame_s=frame_s,
    )


def persistence_spectrum(
    trace: EegTrace,
    band_low_hz: float = 0.0,
    band_high_hz: float = 45.0,
    resolution_hz: float = 1.0,
    n_power_bins: int = 64,
    frame_s: float = 60.0,
    min_frames: int = 10,
) -> PersistenceSpectrum:
    """Occupancy histogram of per-frame band power over a fixed frequency grid.

    Shows which (frequency, power) cells a trace revisits; the band with the
    highest mean power marks the dominant rhythm. Requires at least
    ``min_frames`` frames so occupancy is meaningful.
    """
    freqs, psd = _frame_psd(trace, frame_s)
    if psd.shape[0] < min_frames:
        raise DegenerateInputError(
            f"persistence spectrum needs >= {min_frames} frames, got {psd.shape[0]}"
        )
    n_bands = int(round((band_high_hz - band_low_hz) / resolution_hz))
    if n_bands < 1:
        raise DegenerateInputError("frequency range narrower than one resolution step")
    edges = band_low_hz + resolution_hz * np.arange(n_bands + 1)
    band_idx = np.floor((freqs - band_low_hz) / resolution_hz).astype(np.int64)
    in_range = (band_idx >= 0) & (band_idx < n_bands) & (freqs >= band_low_hz)
    sums = np.zeros((psd.shape[0], n_bands))
    np.add.at(sums.T, band_idx[in_range], psd[:, in_range].T)
    counts = np.bincount(band_idx[in_range], minlength=n_bands)
    if np.any(counts == 0):
        raise DegenerateInputError("persistence bands finer than the FFT resolution")
    band_power = sums / counts  # (n_frames, n_bands)

    z = np.log10(band_power + 1e-30)
    lo, hi = float(z.min()), float(z.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    power_edges = np.linspace(lo, hi, n_power_bins + 1)
    hist = np.empty((n_bands, n_power_bins), dtype=np.int64)
    for b in range(n_bands):
        hist[b], _ = np.histogram(z[:, b], bins=power_edges)
    return PersistenceSpectrum(
        counts=hist,
        freq_edges_hz=edges,
        power_edges_log10=power_edges,
        band_mean_power=band_power.mean(axis=0),
    )
