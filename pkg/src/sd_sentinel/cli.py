"""Command-line interface.

Every subcommand takes ``--config FILE`` (INI; falls back to the path in
``SD_SENTINEL_CONFIG``, then to built-in defaults) and ``--seed`` to override
the root seed. Delimited files are the primary outputs; figures are rendered
next to them by default and can be switched off with ``--no-figures``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error
(unreadable traces, malformed datasets, bad checkpoints), 4 unexpected
internal error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .bench import format_bench, run_bench
from .config import ENV_CONFIG_VAR, RunConfig, config_keys, load_config
from .errors import ConfigError, DataError
from .evaluation import (
    evaluate_split,
    sweep_split,
    write_report,
    write_sweep,
    report_rows,
)
from .model import build_model, infer_windows, load_checkpoint, save_checkpoint, train
from .plots import (
    save_confidence_figure,
    save_power_figure,
    save_spectrogram_figure,
    save_sweep_figure,
    write_matrix_csv,
    write_pgm,
)
from .scoring import confidence, find_confidence_peaks
from .simulate import leaky_integral, make_dataset, load_manifest
from .spectral import persistence_spectrum
from .trace import read_trace
from .windows import (
    crop_windows,
    featurize,
    read_window_dataset,
    stack_windows,
    windows_from_trace,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _config_epilog() -> str:
    lines = ["configuration keys (INI sections, defaults shown):"]
    for key, default, kind in config_keys():
        lines.append(f"  {key:<34} {default:<12} ({kind})")
    return "\n".join(lines)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", default=None,
                        help=f"INI config file (default: ${ENV_CONFIG_VAR} or built-ins)")
    parser.add_argument("--seed", type=int, default=None, help="override the root seed")


def _load_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(ENV_CONFIG_VAR)
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = load_config(path)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sd-sentinel",
        description="Detect spreading depolarizations in single-channel EEG.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(
            name, help=help_, epilog=_config_epilog(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        _add_common(p)
        return p

    p = add("simulate", "generate a seeded synthetic dataset")
    p.add_argument("--out", metavar="DIR", required=True, help="dataset output directory")

    p = add("features", "compute and render features of one trace")
    p.add_argument("--trace", metavar="FILE", required=True)
    p.add_argument("--out-prefix", metavar="PREFIX", default=None,
                   help="output path prefix (default: trace path without suffix)")
    p.add_argument("--no-figures", action="store_true")

    p = add("train", "train a detector on a dataset's window file")
    p.add_argument("--dataset", metavar="DIR", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--out", metavar="FILE", required=True, help="checkpoint output path")
    p.add_argument("--arch", choices=("dual", "image", "vector"), default=None,
                   help="override model.arch from the config")

    p = add("infer", "run a trained detector over one trace")
    p.add_argument("--model", metavar="FILE", required=True)
    p.add_argument("--trace", metavar="FILE", required=True)
    p.add_argument("--out", metavar="FILE", default=None,
                   help="outcome CSV path (default: <trace>.outcomes.csv)")
    p.add_argument("--no-figures", action="store_true")

    p = add("evaluate", "score a detector against a labeled dataset split")
    p.add_argument("--model", metavar="FILE", required=True)
    p.add_argument("--dataset", metavar="DIR", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", metavar="FILE", required=True, help="report CSV path")
    p.add_argument("--ablations", action="store_true",
                   help="also score the zero-image and zero-vector ablations")

    p = add("sweep", "event counts across confidence thresholds")
    p.add_argument("--model", metavar="FILE", required=True)
    p.add_argument("--dataset", metavar="DIR", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", metavar="FILE", required=True, help="sweep CSV path")
    p.add_argument("--no-figures", action="store_true")

    p = add("bench", "time the per-hour CPU cost of the pipeline")
    p.add_argument("--hours", type=int, default=None, help="override bench.hours")

    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    manifest = make_dataset(cfg, args.out)
    for split, entry in manifest["splits"].items():
        hours = sum(seg["duration_min"] for seg in entry["segments"]) / 60.0
        n_sd = sum(seg["n_sd"] for seg in entry["segments"])
        print(f"{split}: {len(entry['segments'])} segments, {hours:g} h, {n_sd} SDs "
              f"-> {entry['windows']}")
    print(f"manifest: {Path(args.out) / 'manifest.json'}")
    return EXIT_OK


def _cmd_features(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    trace = read_trace(args.trace)
    prefix = args.out_prefix or str(Path(args.trace).with_suffix(""))
    spec, power = featurize(trace, cfg)
    leaky = leaky_integral(power)

    write_matrix_csv(spec.values, f"{prefix}.spectrogram.csv", col_prefix="min")
    with open(f"{prefix}.power.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["minute", "power", "leaky_integral"])
        for i, (pv, lv) in enumerate(zip(power.values, leaky)):
            writer.writerow([i, f"{pv:.8g}", f"{lv:.8g}"])
    outputs = [f"{prefix}.spectrogram.csv", f"{prefix}.power.csv"]

    samples = crop_windows(spec, power, None, cfg.window.width_min, cfg.window.log_eps)
    if samples:
        write_pgm(samples[0].image, f"{prefix}.window0.pgm")
        outputs.append(f"{prefix}.window0.pgm")

    pers = persistence_spectrum(trace)
    print(f"dominant rhythm: {pers.peak_frequency_hz:g} Hz "
          f"(band {pers.freq_edges_hz[pers.peak_band_index]:g}-"
          f"{pers.freq_edges_hz[pers.peak_band_index + 1]:g} Hz)")

    if not args.no_figures:
        outputs.append(str(save_spectrogram_figure(
            spec, f"{prefix}.spectrogram.png", title=Path(args.trace).name)))
        outputs.append(str(save_power_figure(power, leaky, f"{prefix}.power.png")))
    for out in outputs:
        print(f"wrote {out}")
    return EXIT_OK


def _read_split_windows(dataset: str, split: str):
    manifest = load_manifest(Path(dataset) / "manifest.json")
    if split not in manifest["splits"]:
        raise DataError(f"split {split!r} not in manifest (has {sorted(manifest['splits'])})")
    return read_window_dataset(Path(dataset) / manifest["splits"][split]["windows"])


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.arch is not None:
        cfg.model.arch = args.arch
    samples = _read_split_windows(args.dataset, args.split)
    _, labels, images, vectors = stack_windows(samples)
    model = build_model(cfg.model, seed=cfg.seed)
    print(f"training {cfg.model.arch} model ({model.param_count()} parameters) "
          f"on {len(samples)} windows ({int(labels.sum())} positive)")
    losses = train(model, images, vectors, labels, cfg.train, seed=cfg.seed)
    if losses:
        print(f"epoch 1 loss {losses[0]:.4f} -> epoch {len(losses)} loss {losses[-1]:.4f}")
    save_checkpoint(model, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_infer(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    model = load_checkpoint(args.model)
    trace = read_trace(args.trace)
    samples = windows_from_trace(trace, None, cfg)
    series = infer_windows(model, samples, cfg.model.threshold, cfg.model.ablation)
    conf = confidence(series, cfg.score.sum_window_min)
    peaks = find_confidence_peaks(conf, cfg.score.peak_threshold)

    out = Path(args.out) if args.out else Path(args.trace).with_suffix(".outcomes.csv")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["minute", "probability", "outcome"])
        for minute, prob, outcome in zip(series.minutes, series.probabilities, series.outcomes):
            writer.writerow([minute, f"{prob:.6f}", outcome])
    conf_csv = out.with_suffix(".confidence.csv")
    with open(conf_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["minute", "confidence"])
        for minute, score in zip(conf.minutes, conf.scores):
            writer.writerow([minute, score])

    if peaks.size:
        pretty = ", ".join(f"{p:g}" for p in peaks)
        print(f"confidence peaks >= {cfg.score.peak_threshold}: minute {pretty}")
    else:
        print(f"no confidence peaks >= {cfg.score.peak_threshold}")
    outputs = [str(out), str(conf_csv)]
    if not args.no_figures:
        fig = save_confidence_figure(
            conf, out.with_suffix(".confidence.png"),
            threshold=cfg.score.peak_threshold, title=Path(args.trace).name,
        )
        outputs.append(str(fig))
    for o in outputs:
        print(f"wrote {o}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    model = load_checkpoint(args.model)
    evals = [evaluate_split(model, args.dataset, args.split, cfg)]
    if args.ablations:
        for ablation in ("zero-image", "zero-vector"):
            evals.append(evaluate_split(model, args.dataset, args.split, cfg, ablation))
    write_report(evals, args.out)
    for row in report_rows(evals):
        print("  ".join(f"{cell:>24}" if i else f"{cell:<18}" for i, cell in enumerate(row)))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    model = load_checkpoint(args.model)
    rows = sweep_split(model, args.dataset, args.split, cfg)
    write_sweep(rows, args.out)
    print(f"wrote {args.out}")
    if not args.no_figures:
        fig = save_sweep_figure(rows, Path(args.out).with_suffix(".png"),
                                title=f"{args.split} split")
        print(f"wrote {fig}")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.hours is not None:
        cfg.bench.hours = args.hours
        cfg.validate()
    result = run_bench(cfg)
    for line in format_bench(result):
        print(line)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "features": _cmd_features,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
