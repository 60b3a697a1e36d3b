"""Detection scoring: confidence series, binary metrics, and peak matching.

Per-window binary outcomes are fused into an integer confidence score by a
sliding sum: score[t] = sum of the 30 outcomes centered on minute t (the 15
before, t itself, and the 14 after). A perfectly detected SD therefore shows
a triangular confidence bump peaking at 30, and the ground-truth analogue of
that bump is the expected-confidence profile used for distance scoring.

Event-level evaluation finds local maxima of the confidence series at or
above a threshold and matches them one-to-one against true peaks within a
time tolerance, greedily by ascending time error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateInputError
from .trace import SdLabelSet


@dataclass
class OutcomeSeries:
    """Per-minute detector output aligned to absolute trace minutes."""

    start_min: int
    probabilities: np.ndarray  # float32 (n,)
    outcomes: np.ndarray       # uint8 (n,)
    threshold: float = 0.5

    @property
    def minutes(self) -> np.ndarray:
        return self.start_min + np.arange(self.outcomes.size)


@dataclass
class ConfidenceSeries:
    """Sliding-sum confidence, integer-valued, aligned to absolute minutes."""

    start_min: int
    scores: np.ndarray  # int64 (n,)

    @property
    def minutes(self) -> np.ndarray:
        return self.start_min + np.arange(self.scores.size)


@dataclass
class BinaryMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float | None
    specificity: float | None
    accuracy: float | None


@dataclass
class PeakMatch:
    tp: int
    fn: int
    fp: int
    pairs: list[tuple[float, float]] = field(default_factory=list)  # (pred, truth)


@dataclass
class SweepRow:
    threshold: int
    tp: int
    fn: int
    fp: int
    sensitivity: float | None


def confidence_scores(outcomes: np.ndarray, window: int = 30) -> np.ndarray:
    """Sliding sum of a 0/1 outcome array; length shrinks by window - 1."""
    v = np.asarray(outcomes)
    if v.ndim != 1:
        raise DataError("outcome array must be 1-D")
    if v.size < window:
        raise DegenerateInputError(
            f"outcome series of {v.size} minutes is shorter than the {window}-minute "
            "summation window"
        )
    c = np.concatenate([[0], np.cumsum(v.astype(np.int64))])
    return c[window:] - c[:-window]


def confidence(series: OutcomeSeries, window: int = 30) -> ConfidenceSeries:
    """Confidence for every minute whose full window of outcomes exists.

    The score attributed to minute t sums outcomes over [t - w/2, t + w/2),
    so the series starts window//2 minutes after the outcome series does.
    """
    scores = confidence_scores(series.outcomes, window)
    return ConfidenceSeries(start_min=series.start_min + window // 2, scores=scores)


def expected_confidence(
    labels: SdLabelSet, start_min: float, n_minutes: int, window: int = 30
) -> np.ndarray:
    """Ideal confidence profile: triangles of height ``window`` at each peak,
    descending linearly to zero window/2 minutes away, combined by maximum."""
    half = window // 2
    minutes = start_min + np.arange(n_minutes, dtype=np.float64)
    out = np.zeros(n_minutes)
    for p in labels.peaks_min:
        d = np.abs(minutes - p)
        np.maximum(out, np.where(d <= half, window * (half - d) / half, 0.0), out=out)
    return out


def binary_metrics(pred: np.ndarray, truth: np.ndarray) -> BinaryMetrics:
    """Confusion counts and the standard ratios; impossible ratios are None."""
    p = np.asarray(pred).astype(bool)
    t = np.asarray(truth).astype(bool)
    if p.shape != t.shape:
        raise DataError(f"prediction shape {p.shape} != truth shape {t.shape}")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    tn = int(np.sum(~p & ~t))
    fn = int(np.sum(~p & t))
    sens = tp / (tp + fn) if (tp + fn) > 0 else None
    spec = tn / (tn + fp) if (tn + fp) > 0 else None
    acc = (tp + tn) / p.size if p.size > 0 else None
    return BinaryMetrics(tp, fp, tn, fn, sens, spec, acc)


def euclidean(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DataError(f"cannot compare series of shapes {u.shape} and {v.shape}")
    return float(np.sqrt(np.sum(np.square(u - v))))


def find_confidence_peaks(series: ConfidenceSeries, threshold: float) -> np.ndarray:
    """Minutes of local maxima at or above threshold; plateaus collapse to
    their leftmost minute, and series edges count as minus infinity."""
    vals = series.scores
    if vals.size == 0:
        return np.empty(0, dtype=np.float64)
    change = np.flatnonzero(np.diff(vals) != 0)
    run_starts = np.concatenate([[0], change + 1])
    run_vals = vals[run_starts].astype(np.float64)
    left = np.concatenate([[-np.inf], run_vals[:-1]])
    right = np.concatenate([run_vals[1:], [-np.inf]])
    is_peak = (run_vals > left) & (run_vals > right) & (run_vals >= threshold)
    return (series.start_min + run_starts[is_peak]).astype(np.float64)


def match_peaks(
    pred_minutes: np.ndarray, truth_minutes: np.ndarray, tol_min: float = 15.0
) -> PeakMatch:
    """Greedy one-to-one matching by ascending |dt|, within tolerance.

    Unmatched truth peaks are false negatives, unmatched predictions false
    positives. Ties on |dt| break on earlier prediction then earlier truth,
    so the matching is deterministic.
    """
    pred = np.asarray(pred_minutes, dtype=np.float64)
    truth = np.asarray(truth_minutes, dtype=np.float64)
    candidates = []
    for i, p in enumerate(pred):
        for j, t in enumerate(truth):
            d = abs(p - t)
            if d <= tol_min:
                candidates.append((d, p, t, i, j))
    candidates.sort()
    pred_free = np.ones(pred.size, dtype=bool)
    truth_free = np.ones(truth.size, dtype=bool)
    pairs: list[tuple[float, float]] = []
    for _, p, t, i, j in candidates:
        if pred_free[i] and truth_free[j]:
            pred_free[i] = False
            truth_free[j] = False
            pairs.append((p, t))
    tp = len(pairs)
    return PeakMatch(tp=tp, fn=int(truth_free.sum()), fp=int(pred_free.sum()), pairs=pairs)


def threshold_sweep(
    items: list[tuple[ConfidenceSeries, SdLabelSet]],
    thresholds: range | list[int] | None = None,
    tol_min: float = 15.0,
) -> list[SweepRow]:
    """Aggregate peak-matching counts across segments at each threshold."""
    if thresholds is None:
        thresholds = range(1, 31)
    rows: list[SweepRow] = []
    for theta in thresholds:
        tp = fn = fp = 0
        for conf, labels in items:
            pred = find_confidence_peaks(conf, theta)
            m = match_peaks(pred, labels.peaks_min, tol_min)
            tp += m.tp
            fn += m.fn
            fp += m.fp
        sens = tp / (tp + fn) if (tp + fn) > 0 else None
        rows.append(SweepRow(threshold=int(theta), tp=tp, fn=fn, fp=fp, sensitivity=sens))
    return rows
