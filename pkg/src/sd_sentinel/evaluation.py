"""Split-level evaluation: window metrics, confidence distance, event counts.

A model is scored against a dataset split on three levels:

  * per-window: confusion counts of the binary outcomes against the
    peak-dilated window labels, pooled over every segment;
  * confidence distance: Euclidean distance between each segment's
    confidence series and the ideal triangular profile of its true peaks;
  * per-event: confidence peaks at or above the operating threshold matched
    one-to-one against true SD peaks, pooled into event sensitivity and a
    false-alarm rate per recording hour.

Reports are plain CSV, one row per model variant, with ``undefined`` in
ratio cells whose denominator is empty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import DataError
from .model import SdDetector, infer
from .scoring import (
    BinaryMetrics,
    ConfidenceSeries,
    OutcomeSeries,
    PeakMatch,
    SweepRow,
    binary_metrics,
    confidence,
    euclidean,
    expected_confidence,
    find_confidence_peaks,
    match_peaks,
    threshold_sweep,
)
from .simulate import load_manifest
from .trace import EegTrace, SdLabelSet, read_labels, read_trace
from .windows import stack_windows, windows_from_trace


@dataclass
class SegmentEvaluation:
    """Everything measured on one segment at one operating point."""

    name: str
    duration_h: float
    window_counts: tuple[int, int, int, int]  # tp, fp, tn, fn
    confidence: ConfidenceSeries
    expected: np.ndarray
    distance: float
    peaks: PeakMatch
    n_truth: int


@dataclass
class SplitEvaluation:
    """Pooled scores of one model variant over a whole split."""

    variant: str
    hours: float
    window_metrics: BinaryMetrics
    mean_distance: float
    peak_tp: int
    peak_fn: int
    peak_fp: int
    peak_sensitivity: float | None
    fp_per_hour: float
    segments: list[SegmentEvaluation]


def evaluate_segment(
    model: SdDetector,
    trace: EegTrace,
    labels: SdLabelSet,
    config: RunConfig | None = None,
    ablation: str = "none",
    name: str = "",
) -> SegmentEvaluation:
    """Window, confidence, and event scores for a single labeled trace."""
    config = config or RunConfig()
    samples = windows_from_trace(trace, labels, config)
    centers, truth, images, vectors = stack_windows(samples)
    if centers.size == 0:
        raise DataError(f"segment {name or '<trace>'} yields no windows")
    probs, outcomes = infer(model, images, vectors, config.model.threshold, ablation)
    tp = int(np.sum((outcomes == 1) & (truth == 1)))
    fp = int(np.sum((outcomes == 1) & (truth == 0)))
    tn = int(np.sum((outcomes == 0) & (truth == 0)))
    fn = int(np.sum((outcomes == 0) & (truth == 1)))

    series = OutcomeSeries(
        start_min=int(centers[0]), probabilities=probs, outcomes=outcomes,
        threshold=config.model.threshold,
    )
    conf = confidence(series, config.score.sum_window_min)
    expected = expected_confidence(
        labels, conf.start_min, conf.scores.size, config.score.sum_window_min
    )
    pred_peaks = find_confidence_peaks(conf, config.score.peak_threshold)
    match = match_peaks(pred_peaks, labels.peaks_min, config.score.match_tol_min)
    return SegmentEvaluation(
        name=name,
        duration_h=trace.duration_s / 3600.0,
        window_counts=(tp, fp, tn, fn),
        confidence=conf,
        expected=expected,
        distance=euclidean(conf.scores, expected),
        peaks=match,
        n_truth=len(labels),
    )


def _pool(variant: str, segments: list[SegmentEvaluation]) -> SplitEvaluation:
    tp = sum(s.window_counts[0] for s in segments)
    fp = sum(s.window_counts[1] for s in segments)
    tn = sum(s.window_counts[2] for s in segments)
    fn = sum(s.window_counts[3] for s in segments)
    metrics = BinaryMetrics(
        tp=tp, fp=fp, tn=tn, fn=fn,
        sensitivity=tp / (tp + fn) if (tp + fn) > 0 else None,
        specificity=tn / (tn + fp) if (tn + fp) > 0 else None,
        accuracy=(tp + tn) / (tp + fp + tn + fn) if segments else None,
    )
    hours = sum(s.duration_h for s in segments)
    ptp = sum(s.peaks.tp for s in segments)
    pfn = sum(s.peaks.fn for s in segments)
    pfp = sum(s.peaks.fp for s in segments)
    return SplitEvaluation(
        variant=variant,
        hours=hours,
        window_metrics=metrics,
        mean_distance=float(np.mean([s.distance for s in segments])),
        peak_tp=ptp,
        peak_fn=pfn,
        peak_fp=pfp,
        peak_sensitivity=ptp / (ptp + pfn) if (ptp + pfn) > 0 else None,
        fp_per_hour=pfp / hours if hours > 0 else 0.0,
        segments=segments,
    )


def iter_split_segments(dataset_dir: str | Path, split: str):
    """Yield (name, trace, labels) for each segment of a dataset split."""
    dataset_dir = Path(dataset_dir)
    manifest = load_manifest(dataset_dir / "manifest.json")
    if split not in manifest["splits"]:
        raise DataError(
            f"split {split!r} not in manifest (has {sorted(manifest['splits'])})"
        )
    for seg in manifest["splits"][split]["segments"]:
        trace = read_trace(dataset_dir / seg["trace"])
        labels = read_labels(dataset_dir / seg["labels"])
        yield Path(seg["trace"]).stem, trace, labels


def evaluate_split(
    model: SdDetector,
    dataset_dir: str | Path,
    split: str,
    config: RunConfig | None = None,
    ablation: str = "none",
    variant: str | None = None,
) -> SplitEvaluation:
    """Score one model variant over every segment of a split."""
    config = config or RunConfig()
    if variant is None:
        variant = model.arch if ablation == "none" else f"{model.arch}:{ablation}"
    segments = [
        evaluate_segment(model, trace, labels, config, ablation, name)
        for name, trace, labels in iter_split_segments(dataset_dir, split)
    ]
    if not segments:
        raise DataError(f"split {split!r} has no segments")
    return _pool(variant, segments)


def sweep_split(
    model: SdDetector,
    dataset_dir: str | Path,
    split: str,
    config: RunConfig | None = None,
    thresholds: range | list[int] | None = None,
    ablation: str = "none",
) -> list[SweepRow]:
    """Event counts over a grid of confidence thresholds for one split."""
    config = config or RunConfig()
    items = []
    for name, trace, labels in iter_split_segments(dataset_dir, split):
        seg = evaluate_segment(model, trace, labels, config, ablation, name)
        items.append((seg.confidence, labels))
    if not items:
        raise DataError(f"split {split!r} has no segments")
    return threshold_sweep(items, thresholds, config.score.match_tol_min)


REPORT_COLUMNS = [
    "model_variant",
    "hours",
    "window_sensitivity",
    "window_specificity",
    "window_accuracy",
    "mean_confidence_distance",
    "tp_peaks",
    "fn_peaks",
    "fp_peaks",
    "peak_sensitivity",
    "fp_per_hour",
]


def _cell(value: float | None, places: int = 4) -> str:
    return "undefined" if value is None else f"{value:.{places}f}"


def report_rows(evals: list[SplitEvaluation]) -> list[list[str]]:
    rows = [list(REPORT_COLUMNS)]
    for e in evals:
        m = e.window_metrics
        rows.append(
            [
                e.variant,
                f"{e.hours:.2f}",
                _cell(m.sensitivity),
                _cell(m.specificity),
                _cell(m.accuracy),
                f"{e.mean_distance:.2f}",
                str(e.peak_tp),
                str(e.peak_fn),
                str(e.peak_fp),
                _cell(e.peak_sensitivity),
                f"{e.fp_per_hour:.4f}",
            ]
        )
    return rows


def write_report(evals: list[SplitEvaluation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(report_rows(evals))


def write_sweep(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "tp", "fn", "fp", "sensitivity"])
        for r in rows:
            writer.writerow([r.threshold, r.tp, r.fn, r.fp, _cell(r.sensitivity)])
