"""Run configuration and deterministic seed fan-out.

A run is parameterized by a single :class:`RunConfig` loaded from an
INI-style file (sections of flat ``key = value`` pairs). Every field has a
default, so an empty file is a valid configuration; unknown sections or keys
are hard errors rather than silent typos. All randomness in the package is
derived from ``RunConfig.seed`` through :func:`fanout_rng`, which hashes a
root seed together with a tag path into an independent child stream.
"""

from __future__ import annotations

import configparser
import dataclasses
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

ENV_CONFIG_VAR = "SD_SENTINEL_CONFIG"


@dataclass
class BandpassConfig:
    low_hz: float = 0.5
    high_hz: float = 45.0
    order: int = 4


@dataclass
class DespikeConfig:
    window_s: float = 10.0
    hop_s: float = 1.0
    k: float = 8.0


@dataclass
class SpectrogramConfig:
    frame_s: float = 60.0
    band_low_hz: float = 0.5
    band_high_hz: float = 1.85
    n_freq_bins: int = 30
    power_low_hz: float = 0.5
    power_high_hz: float = 45.0


@dataclass
class WindowConfig:
    width_min: int = 30
    image_norm: str = "log-minmax"
    vector_norm: str = "zscore"
    log_eps: float = 1e-12


@dataclass
class ModelConfig:
    arch: str = "dual"
    conv_channels: tuple[int, ...] = (8, 16, 32)
    fusion_channels: int = 4
    threshold: float = 0.5
    ablation: str = "none"


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 320
    learning_rate: float = 0.001
    beta1: float = 0.5
    beta2: float = 0.5
    eps: float = 1e-8
    loss_clamp: float = 1e-7


@dataclass
class SimulateConfig:
    sample_rate_hz: float = 200.0
    train_hours: float = 200.0
    test_hours: float = 200.0
    segment_hours: float = 2.0
    sd_rate_per_h: float = 0.5
    alpha_min: float = 0.0
    alpha_max: float = 0.3
    beta_min: float = 0.0
    beta_max: float = 0.2
    trough_depth_min: float = 0.1
    trough_depth_max: float = 0.3
    onset_min: float = 5.0
    hold_min_min: float = 5.0
    hold_min_max: float = 10.0
    recovery_min: float = 10.0
    envelope_smoothing_s: float = 0.0
    # slow power-offset stressor; deep enough to force drift-invariance
    # without drowning the suppression notch of a shallow SD
    offset_depth: float = 0.08
    offset_period_min_min: float = 40.0
    offset_period_max_min: float = 180.0


@dataclass
class ScoreConfig:
    sum_window_min: int = 30
    match_tol_min: float = 15.0
    peak_threshold: int = 15


@dataclass
class BenchConfig:
    hours: int = 10
    threads: int = 1


@dataclass
class RunConfig:
    seed: int = 0
    bandpass: BandpassConfig = field(default_factory=BandpassConfig)
    despike: DespikeConfig = field(default_factory=DespikeConfig)
    spectrogram: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    score: ScoreConfig = field(default_factory=ScoreConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def validate(self) -> None:
        bp = self.bandpass
        if not (0.0 < bp.low_hz < bp.high_hz):
            raise ConfigError("bandpass: need 0 < low_hz < high_hz")
        if bp.order < 1:
            raise ConfigError("bandpass: order must be >= 1")
        if self.despike.window_s <= 0 or self.despike.hop_s <= 0:
            raise ConfigError("despike: window_s and hop_s must be positive")
        if self.despike.k <= 0:
            raise ConfigError("despike: k must be positive")
        sp = self.spectrogram
        if not (0.0 <= sp.band_low_hz < sp.band_high_hz):
            raise ConfigError("spectrogram: need 0 <= band_low_hz < band_high_hz")
        if sp.n_freq_bins < 1 or sp.frame_s <= 0:
            raise ConfigError("spectrogram: n_freq_bins >= 1 and frame_s > 0 required")
        if self.window.width_min < 1:
            raise ConfigError("window: width_min must be >= 1")
        if self.window.image_norm not in ("log-minmax",):
            raise ConfigError(f"window: unsupported image_norm {self.window.image_norm!r}")
        if self.window.vector_norm not in ("zscore",):
            raise ConfigError(f"window: unsupported vector_norm {self.window.vector_norm!r}")
        if self.model.arch not in ("dual", "image", "vector"):
            raise ConfigError(f"model: unsupported arch {self.model.arch!r}")
        if self.model.ablation not in ("none", "zero-image", "zero-vector"):
            raise ConfigError(f"model: unsupported ablation {self.model.ablation!r}")
        if not (0.0 <= self.model.threshold <= 1.0):
            raise ConfigError("model: threshold must lie in [0, 1]")
        if len(self.model.conv_channels) != 3 or any(c < 1 for c in self.model.conv_channels):
            raise ConfigError("model: conv_channels must be three positive integers")
        tr = self.train
        if tr.epochs < 0 or tr.batch_size < 1 or tr.learning_rate <= 0:
            raise ConfigError("train: invalid epochs/batch_size/learning_rate")
        if not (0.0 <= tr.beta1 < 1.0 and 0.0 <= tr.beta2 < 1.0):
            raise ConfigError("train: beta1 and beta2 must lie in [0, 1)")
        sim = self.simulate
        if sim.sample_rate_hz <= 0 or sim.segment_hours <= 0:
            raise ConfigError("simulate: sample_rate_hz and segment_hours must be positive")
        for lo, hi, name in (
            (sim.alpha_min, sim.alpha_max, "alpha"),
            (sim.beta_min, sim.beta_max, "beta"),
            (sim.trough_depth_min, sim.trough_depth_max, "trough_depth"),
            (sim.hold_min_min, sim.hold_min_max, "hold_min"),
        ):
            if lo > hi or lo < 0:
                raise ConfigError(f"simulate: invalid {name} range [{lo}, {hi}]")
        if self.score.sum_window_min < 1 or self.score.match_tol_min < 0:
            raise ConfigError("score: invalid sum_window_min/match_tol_min")
        if not (1 <= self.score.peak_threshold <= self.score.sum_window_min):
            raise ConfigError("score: peak_threshold must lie in [1, sum_window_min]")
        if self.bench.hours < 1 or self.bench.threads < 1:
            raise ConfigError("bench: hours and threads must be >= 1")


_SECTION_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "seed"}


def _parse_value(raw: str, kind: type, key: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        # tuple[int, ...] fields are written as comma-separated integers
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from exc


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(path: str | Path) -> RunConfig:
    """Read a RunConfig from an INI file; unknown sections or keys raise."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    cfg = RunConfig()
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items(section):
                if key != "seed":
                    raise ConfigError(f"{path}: unknown config key [run] {key}")
                cfg.seed = _parse_value(raw, int, "run.seed")
            continue
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"{path}: unknown config section [{section}]")
        sub = getattr(cfg, section)
        known = {f.name: f for f in dataclasses.fields(sub)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown config key [{section}] {key}")
            kind = known[key].type
            pytype = {"int": int, "float": float, "str": str}.get(kind, tuple) if isinstance(kind, str) else kind
            setattr(sub, key, _parse_value(raw, pytype, f"{section}.{key}"))
    cfg.validate()
    return cfg


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Write every field (defaults included) so the file round-trips exactly."""
    parser = configparser.ConfigParser()
    parser["run"] = {"seed": str(cfg.seed)}
    for section in _SECTION_FIELDS:
        sub = getattr(cfg, section)
        parser[section] = {
            f.name: _format_value(getattr(sub, f.name)) for f in dataclasses.fields(sub)
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def config_keys() -> list[tuple[str, str, str]]:
    """(section.key, default, type) triples for help text and validation."""
    rows = [("run.seed", "0", "int")]
    for section, fld in _SECTION_FIELDS.items():
        sub = fld.default_factory()  # type: ignore[misc]
        for f in dataclasses.fields(sub):
            default = _format_value(getattr(sub, f.name))
            kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
            rows.append((f"{section}.{f.name}", default, kind))
    return rows


def fanout_seed(root_seed: int, *tags: int | str) -> np.random.SeedSequence:
    """Derive an independent child seed from a root seed and a tag path.

    Tags are folded into the entropy pool as counters (ints pass through,
    strings are CRC-hashed), so ('train', 3) and ('test', 3) never collide.
    """
    words: list[int] = [int(root_seed) & 0xFFFFFFFFFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            words.append(zlib.crc32(tag.encode("utf-8")))
        else:
            words.append(int(tag) & 0xFFFFFFFFFFFFFFFF)
    return np.random.SeedSequence(words)


def fanout_rng(root_seed: int, *tags: int | str) -> np.random.Generator:
    """Deterministic RNG for one module/purpose, independent across tags."""
    return np.random.default_rng(fanout_seed(root_seed, *tags))
