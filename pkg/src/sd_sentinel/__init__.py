"""Spreading-depolarization detection from single-channel EEG.

The package covers the full workflow: trace I/O and synthesis, conditioning,
spectral features, windowing, a small dual-path CNN trained from scratch,
SD-injection simulation, confidence scoring, and event-level evaluation.
"""

from .bench import BenchResult, run_bench
from .config import RunConfig, fanout_rng, load_config, save_config
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DegenerateInputError,
    SdSentinelError,
    TraceFormatError,
)
from .evaluation import (
    SegmentEvaluation,
    SplitEvaluation,
    evaluate_segment,
    evaluate_split,
    sweep_split,
    write_report,
    write_sweep,
)
from .model import (
    SdDetector,
    analytic_param_count,
    build_model,
    infer,
    infer_trace,
    infer_windows,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .preprocess import bandpass, despike, normalize, preprocess
from .scoring import (
    BinaryMetrics,
    ConfidenceSeries,
    OutcomeSeries,
    binary_metrics,
    confidence,
    euclidean,
    expected_confidence,
    find_confidence_peaks,
    match_peaks,
    threshold_sweep,
)
from .simulate import AugmentSpec, SdTemplate, augment_sd, leaky_integral, make_dataset
from .spectral import (
    PersistenceSpectrum,
    PowerSeries,
    Spectrogram,
    persistence_spectrum,
    power_series,
    spectrogram,
    stft_frame,
)
from .trace import EegTrace, SdLabelSet, read_labels, read_trace, synth_base_eeg, write_labels, write_trace
from .windows import WindowSample, crop_windows, featurize, read_window_dataset, windows_from_trace, write_window_dataset

__version__ = "0.1.0"

__all__ = [
    "AugmentSpec",
    "BenchResult",
    "BinaryMetrics",
    "CheckpointError",
    "ConfidenceSeries",
    "ConfigError",
    "DataError",
    "DegenerateInputError",
    "EegTrace",
    "OutcomeSeries",
    "PersistenceSpectrum",
    "PowerSeries",
    "RunConfig",
    "SdDetector",
    "SdLabelSet",
    "SdSentinelError",
    "SdTemplate",
    "SegmentEvaluation",
    "Spectrogram",
    "SplitEvaluation",
    "TraceFormatError",
    "WindowSample",
    "analytic_param_count",
    "augment_sd",
    "bandpass",
    "binary_metrics",
    "build_model",
    "confidence",
    "crop_windows",
    "despike",
    "euclidean",
    "evaluate_segment",
    "evaluate_split",
    "expected_confidence",
    "fanout_rng",
    "featurize",
    "find_confidence_peaks",
    "infer",
    "infer_trace",
    "infer_windows",
    "leaky_integral",
    "load_checkpoint",
    "load_config",
    "make_dataset",
    "match_peaks",
    "normalize",
    "persistence_spectrum",
    "power_series",
    "preprocess",
    "read_labels",
    "read_trace",
    "read_window_dataset",
    "run_bench",
    "save_checkpoint",
    "save_config",
    "spectrogram",
    "stft_frame",
    "sweep_split",
    "synth_base_eeg",
    "threshold_sweep",
    "train",
    "windows_from_trace",
    "write_labels",
    "write_report",
    "write_sweep",
    "write_trace",
    "write_window_dataset",
]
