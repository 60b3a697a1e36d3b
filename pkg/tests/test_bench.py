"""Latency benchmark harness: timing bookkeeping and report formatting."""

from __future__ import annotations

import pytest

from sd_sentinel.bench import REFERENCE_S_PER_H, BenchResult, format_bench, run_bench
from sd_sentinel.config import RunConfig


@pytest.fixture(scope="module")
def quick_result():
    cfg = RunConfig()
    cfg.bench.hours = 1.0
    cfg.bench.threads = 1
    return run_bench(cfg)


class TestRunBench:
    def test_stages_are_positive(self, quick_result):
        assert set(quick_result.stage_s_per_h) == set(REFERENCE_S_PER_H)
        for seconds in quick_result.stage_s_per_h.values():
            assert seconds > 0.0

    def test_total_sums_stages(self, quick_result):
        assert quick_result.total_s_per_h == pytest.approx(
            sum(quick_result.stage_s_per_h.values())
        )

    def test_records_run_parameters(self, quick_result):
        assert quick_result.hours == 1.0
        assert quick_result.threads == 1


class TestFormatBench:
    def test_reference_rows_present(self):
        result = BenchResult(
            hours=10.0, threads=1,
            stage_s_per_h={
                "conditioning + features": 0.25,
                "windowing + inference": 0.05,
            },
        )
        lines = format_bench(result)
        text = "\n".join(lines)
        assert "10 h" in lines[0] and "1 thread" in lines[0]
        assert "0.08" in text and "0.13" in text
        assert lines[-1].startswith("total")
        assert "0.300" in lines[-1]
