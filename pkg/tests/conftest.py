import sys

import numpy as np
import pytest

from sd_sentinel.config import RunConfig, TrainConfig
from sd_sentinel.model import build_model, train
from sd_sentinel.simulate import make_dataset
from sd_sentinel.trace import EegTrace
from sd_sentinel.windows import read_window_dataset, stack_windows


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tone_trace():
    """10-minute 10 Hz unit-amplitude tone at 200 Hz."""
    fs = 200.0
    t = np.arange(int(10 * 60 * fs)) / fs
    return EegTrace(np.sin(2 * np.pi * 10.0 * t), fs)


def tiny_run_config() -> RunConfig:
    """Small but complete run: 1-hour segments, 2 h per split."""
    cfg = RunConfig()
    cfg.seed = 101
    cfg.simulate.segment_hours = 1.0
    cfg.simulate.train_hours = 2.0
    cfg.simulate.test_hours = 2.0
    cfg.simulate.sd_rate_per_h = 1.5
    cfg.train.epochs = 3
    cfg.train.batch_size = 32
    return cfg


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """(config, dataset_dir, manifest) shared by the orchestration tests."""
    cfg = tiny_run_config()
    out = tmp_path_factory.mktemp("tiny-dataset")
    manifest = make_dataset(cfg, out)
    return cfg, out, manifest


@pytest.fixture(scope="session")
def tiny_model(tiny_dataset):
    """Briefly trained dual model for plumbing tests (not a good detector)."""
    cfg, out, manifest = tiny_dataset
    samples = read_window_dataset(out / manifest["splits"]["train"]["windows"])
    _, labels, images, vectors = stack_windows(samples)
    model = build_model(cfg.model, seed=cfg.seed)
    train(model, images, vectors, labels, cfg.train, seed=cfg.seed)
    return model


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the release-criteria verdict lines collected by the gate tests."""
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "release criteria")
        for line in lines:
            terminalreporter.write_line(line)
