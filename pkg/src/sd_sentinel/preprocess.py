"""Trace conditioning: band-pass filtering, spike removal, normalization.

The detection pipeline feeds every trace through the same three steps:

1. zero-phase Butterworth band-pass (forward-backward, so no group delay),
2. robust despiking against a rolling median/MAD baseline,
3. normalization to zero mean and unit RMS.

All three are deterministic and operate sample-wise on the trace; despiking
touches only the samples it flags.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .config import BandpassConfig, DespikeConfig, RunConfig
from .errors import DegenerateInputError
from .trace import EegTrace


@lru_cache(maxsize=32)
def _design_sos(low_hz: float, high_hz: float, order: int, fs: float) -> np.ndarray:
    nyq = fs / 2.0
    if not (0.0 < low_hz < high_hz < nyq):
        raise DegenerateInputError(
            f"band [{low_hz}, {high_hz}] Hz does not fit below Nyquist {nyq} Hz"
        )
    return butter(order, [low_hz / nyq, high_hz / nyq], btype="band", output="sos")


def bandpass_samples(
    x: np.ndarray, fs: float, low_hz: float, high_hz: float, order: int = 4
) -> np.ndarray:
    """Zero-phase Butterworth band-pass with reflective edge padding."""
    sos = _design_sos(low_hz, high_hz, order, fs)
    padlen = 10 * order
    if x.size <= padlen:
        raise DegenerateInputError(
            f"trace of {x.size} samples is too short to filter (need > {padlen})"
        )
    return sosfiltfilt(sos, x, padtype="even", padlen=padlen)


def bandpass(trace: EegTrace, spec: BandpassConfig | None = None) -> EegTrace:
    spec = spec or BandpassConfig()
    return trace.with_samples(
        bandpass_samples(trace.samples, trace.sample_rate_hz, spec.low_hz, spec.high_hz, spec.order)
    )


def _rolling_robust_stats(
    x: np.ndarray, wlen: int, hop: int
) -> tuple[np.ndarray, np.ndarray]:
    """Median and MAD on a hop grid of centered windows.

    Windows are clipped (not padded) at the trace edges so the statistics
    only ever see real samples.
    """
    n = x.size
    half = wlen // 2
    n_blocks = (n + hop - 1) // hop
    centers = np.minimum(np.arange(n_blocks) * hop + hop // 2, n - 1)
    med = np.empty(n_blocks)
    mad = np.empty(n_blocks)
    full = (centers - half >= 0) & (centers - half + wlen <= n)
    if full.any():
        view = np.lib.stride_tricks.sliding_window_view(x, wlen)
        where = np.flatnonzero(full)
        # chunked so the materialized window matrix stays small
        chunk = 2048
        for lo in range(0, where.size, chunk):
            sel = where[lo : lo + chunk]
            rows = view[centers[sel] - half]
            med[sel] = np.median(rows, axis=1)
            mad[sel] = np.median(np.abs(rows - med[sel, None]), axis=1)
    for j in np.flatnonzero(~full):
        seg = x[max(0, centers[j] - half) : min(n, centers[j] - half + wlen)]
        med[j] = np.median(seg)
        mad[j] = np.median(np.abs(seg - med[j]))
    return med, mad


def find_spikes(
    x: np.ndarray, fs: float, window_s: float = 10.0, k: float = 8.0, hop_s: float = 1.0
) -> np.ndarray:
    """Boolean mask of samples deviating more than k MADs from the local median."""
    wlen = max(3, int(round(window_s * fs)))
    hop = max(1, int(round(hop_s * fs)))
    med, mad = _rolling_robust_stats(x, wlen, hop)
    blocks = np.minimum(np.arange(x.size) // hop, med.size - 1)
    return np.abs(x - med[blocks]) > k * mad[blocks]


def despike_samples(
    x: np.ndarray, fs: float, window_s: float = 10.0, k: float = 8.0, hop_s: float = 1.0
) -> np.ndarray:
    """Replace flagged outliers by linear interpolation between clean neighbors.

    Unflagged samples pass through bit-identically.
    """
    mask = find_spikes(x, fs, window_s, k, hop_s)
    if not mask.any():
        return x.copy()
    clean_idx = np.flatnonzero(~mask)
    if clean_idx.size == 0:
        raise DegenerateInputError("despike flagged every sample; nothing to interpolate from")
    out = x.copy()
    bad_idx = np.flatnonzero(mask)
    out[bad_idx] = np.interp(bad_idx, clean_idx, x[clean_idx])
    return out


def despike(trace: EegTrace, spec: DespikeConfig | None = None) -> EegTrace:
    spec = spec or DespikeConfig()
    return trace.with_samples(
        despike_samples(trace.samples, trace.sample_rate_hz, spec.window_s, spec.k, spec.hop_s)
    )


def normalize_samples(x: np.ndarray) -> np.ndarray:
    """Shift to zero mean and scale to unit RMS; constant input is an error."""
    centered = x - np.mean(x)
    scale = np.sqrt(np.mean(np.square(centered)))
    if not (scale > 0.0) or not np.isfinite(scale):
        raise DegenerateInputError("cannot normalize a constant trace (zero RMS)")
    return centered / scale


def normalize(trace: EegTrace) -> EegTrace:
    return trace.with_samples(normalize_samples(trace.samples))


def preprocess(trace: EegTrace, config: RunConfig | None = None) -> EegTrace:
    """Full conditioning chain: band-pass, despike, normalize."""
    config = config or RunConfig()
    out = bandpass(trace, config.bandpass)
    out = despike(out, config.despike)
    return normalize(out)
