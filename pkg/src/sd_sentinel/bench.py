"""CPU latency benchmark: seconds of compute per hour of recording.

Times the two online stages separately on an in-memory synthetic trace, with
BLAS capped to a fixed thread count so numbers are comparable across hosts:

  * conditioning + features: filtering, despiking, normalization, and the
    spectrogram / power series;
  * windowing + inference: window crops, per-window normalization, and the
    one-at-a-time forward passes.

File I/O never enters the timed regions. Reference rows give the throughput
this pipeline is expected to reach on a commodity CPU core.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from threadpoolctl import threadpool_limits

from .config import RunConfig
from .model import SdDetector, build_model, infer
from .preprocess import preprocess
from .spectral import power_series, spectrogram
from .trace import EegTrace, synth_base_eeg
from .windows import crop_windows, stack_windows

REFERENCE_S_PER_H = {
    "conditioning + features": 0.08,
    "windowing + inference": 0.13,
}


@dataclass
class BenchResult:
    hours: float
    threads: int
    stage_s_per_h: dict[str, float]

    @property
    def total_s_per_h(self) -> float:
        return float(sum(self.stage_s_per_h.values()))


def run_bench(
    config: RunConfig | None = None, model: SdDetector | None = None
) -> BenchResult:
    """Run both stages on a fresh synthetic trace and time them."""
    config = config or RunConfig()
    hours = float(config.bench.hours)
    trace = synth_base_eeg(
        hours * 60.0, config.simulate.sample_rate_hz, seed=config.seed
    )
    model = model or build_model(config.model, seed=config.seed)

    with threadpool_limits(limits=config.bench.threads):
        t0 = time.perf_counter()
        clean = preprocess(trace, config)
        sp = config.spectrogram
        spec = spectrogram(clean, sp.band_low_hz, sp.band_high_hz, sp.n_freq_bins, sp.frame_s)
        power = power_series(clean, sp.power_low_hz, sp.power_high_hz, sp.frame_s)
        t1 = time.perf_counter()
        samples = crop_windows(spec, power, None, config.window.width_min, config.window.log_eps)
        _, _, images, vectors = stack_windows(samples)
        infer(model, images, vectors, config.model.threshold)
        t2 = time.perf_counter()

    return BenchResult(
        hours=hours,
        threads=config.bench.threads,
        stage_s_per_h={
            "conditioning + features": (t1 - t0) / hours,
            "windowing + inference": (t2 - t1) / hours,
        },
    )


def format_bench(result: BenchResult) -> list[str]:
    lines = [
        f"benchmark over {result.hours:g} h of synthetic recording, "
        f"{result.threads} thread(s)",
        f"{'stage':<26} {'measured s/h':>14} {'reference s/h':>14}",
    ]
    for stage, measured in result.stage_s_per_h.items():
        ref = REFERENCE_S_PER_H.get(stage)
        ref_cell = f"{ref:14.2f}" if ref is not None else " " * 14
        lines.append(f"{stage:<26} {measured:14.3f} {ref_cell}")
    lines.append(f"{'total':<26} {result.total_s_per_h:14.3f} "
                 f"{sum(REFERENCE_S_PER_H.values()):14.2f}")
    return lines
