"""File-based rendering of features, confidence traces, and sweep curves.

Everything here draws to files through the Agg backend, so it works headless;
no function ever opens a window. Figures are a courtesy view of the same
numbers the delimited outputs carry, never the only copy of a result.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError
from .scoring import ConfidenceSeries, SweepRow
from .spectral import PowerSeries, Spectrogram
from .trace import SdLabelSet


def write_pgm(image: np.ndarray, path: str | Path) -> Path:
    """Binary PGM (P5) dump of a [0, 1] float image, e.g. one window input."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DataError(f"PGM images must be 2-D, got shape {img.shape}")
    if img.size == 0 or not np.all(np.isfinite(img)):
        raise DataError("PGM images must be non-empty and finite")
    gray = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())
    return path


def write_matrix_csv(values: np.ndarray, path: str | Path, col_prefix: str = "c") -> Path:
    path = Path(path)
    values = np.atleast_2d(np.asarray(values))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{col_prefix}{j}" for j in range(values.shape[1])])
        for row in values:
            writer.writerow([f"{v:.8g}" for v in row])
    return path


def save_spectrogram_figure(spec: Spectrogram, path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    extent = (0.0, spec.n_frames * spec.frame_s / 60.0,
              float(spec.band_edges_hz[0]), float(spec.band_edges_hz[-1]))
    im = ax.imshow(
        np.log10(spec.values + 1e-12), aspect="auto", origin="lower",
        extent=extent, cmap="magma",
    )
    ax.set_xlabel("time [min]")
    ax.set_ylabel("frequency [Hz]")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="log10 power")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_power_figure(
    power: PowerSeries, leaky: np.ndarray | None, path: str | Path, title: str = ""
) -> Path:
    """Per-minute band power, optionally with its leaky accumulation."""
    minutes = np.arange(power.n_frames) * power.frame_s / 60.0
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(minutes, power.values, lw=1.0, label="band power")
    ax.set_xlabel("time [min]")
    ax.set_ylabel(f"power {power.band_low_hz:g}-{power.band_high_hz:g} Hz")
    ax.set_yscale("log")
    if leaky is not None:
        twin = ax.twinx()
        twin.plot(minutes, leaky, lw=1.0, color="tab:orange", label="leaky integral")
        twin.set_ylabel("leaky integral")
        twin.set_yscale("log")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_confidence_figure(
    conf: ConfidenceSeries,
    path: str | Path,
    expected: np.ndarray | None = None,
    labels: SdLabelSet | None = None,
    threshold: float | None = None,
    title: str = "",
) -> Path:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.step(conf.minutes, conf.scores, where="mid", lw=1.2, label="confidence")
    if expected is not None:
        ax.plot(conf.minutes, expected, lw=1.0, ls="--", color="tab:green",
                label="expected")
    if threshold is not None:
        ax.axhline(threshold, color="tab:red", lw=0.8, ls=":", label="threshold")
    if labels is not None and len(labels):
        for k, peak in enumerate(labels.peaks_min):
            ax.axvline(peak, color="k", lw=0.8, alpha=0.5,
                       label="true SD" if k == 0 else None)
    ax.set_xlabel("time [min]")
    ax.set_ylabel("confidence")
    ax.set_ylim(bottom=0)
    ax.legend(loc="upper right", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_sweep_figure(rows: list[SweepRow], path: str | Path, title: str = "") -> Path:
    thresholds = [r.threshold for r in rows]
    sens = [r.sensitivity if r.sensitivity is not None else np.nan for r in rows]
    fps = [r.fp for r in rows]
    fig, ax = plt.subplots(figsize=(7, 3.6))
    ax.plot(thresholds, sens, marker="o", ms=3, label="event sensitivity")
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("sensitivity")
    ax.set_ylim(-0.02, 1.02)
    twin = ax.twinx()
    twin.plot(thresholds, fps, marker="s", ms=3, color="tab:red", label="false positives")
    twin.set_ylabel("false positives")
    lines, names = ax.get_legend_handles_labels()
    lines2, names2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, names + names2, loc="center right", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
