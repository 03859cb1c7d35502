"""Command-line interface: detect, train, synth, eval, ablate, bench.

Configuration layering: built-in defaults, then a JSON config file (``--config``
or the ``FSBAND_CONFIG`` environment variable), then explicit flags. Unknown
config keys are a hard error so typos fail loudly instead of silently falling
back to defaults.

Exit codes: 0 success, 2 bad input (files, config, arguments), 3 model-format
problems, 4 degenerate dataset (e.g. single-class training data).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import net
from .errors import (
    ConfigError,
    DegenerateDatasetError,
    FsbandError,
    ModelFormatError,
    SingleClassError,
)
from .evaluation import (
    ABLATION_VARIANTS,
    benchmark_speed,
    evaluate_scores,
    ingest_scores_csv,
    run_ablation,
    write_report_csv,
    write_report_json,
)
from .freqmaps import LFMConfig, compute_freq_stacks
from .imgcore import load_image
from .metric import (PipelineConfig, detect, write_heatmap_png,
                     write_result_json, write_stats_csv)
from .synth import SynthConfig, gen_dataset, load_arrays, load_manifest

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MODEL = 3
EXIT_DATA = 4

CONFIG_ENV_VAR = "FSBAND_CONFIG"

_TOP_LEVEL_KEYS = {
    "side", "pool_fraction", "classify_threshold", "pool_scope",
    "lfm", "net", "train", "masking", "synth",
}


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------

def _load_config_file(path_flag) -> dict:
    path = path_flag or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(cfg) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _section(cfg: dict, name: str, cls) -> dict:
    body = cfg.get(name, {})
    if not isinstance(body, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(body) - valid
    if unknown:
        raise ConfigError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
    return dict(body)


def _build(cls, base: dict, **overrides):
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    try:
        return cls(**base)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {cls.__name__} settings: {exc}")


def _lfm_config(cfg: dict) -> LFMConfig:
    return _build(LFMConfig, _section(cfg, "lfm", LFMConfig))


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _load_model(path: str) -> net.Model:
    try:
        return net.load_model(path)
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}")


def _print(msg: str) -> None:
    print(msg)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_detect(args) -> int:
    cfg = _load_config_file(args.config)
    model = _load_model(args.model)
    img = load_image(args.image)
    top = {k: cfg[k] for k in ("pool_fraction", "classify_threshold", "pool_scope")
           if k in cfg}
    pipeline = _build(
        PipelineConfig,
        {
            "side": model.config.input_side,
            "lfm": _lfm_config(cfg),
            "gamma": _section(cfg, "masking", PipelineConfig).get("gamma", 1.5),
            **top,
        },
        pool_fraction=args.pool_fraction,
        classify_threshold=args.threshold,
        pool_scope=args.pool_scope,
    )
    bm, qr = detect(img, model, pipeline)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    heatmap = out_dir / f"{stem}_heatmap.png"
    result = out_dir / f"{stem}_result.json"
    write_heatmap_png(bm, heatmap)
    write_result_json(bm, qr, result)
    if args.stats_csv is not None:
        write_stats_csv(bm, args.stats_csv)
    _print(f"{qr.q!r}")
    return EXIT_OK


def _train_setup(args, cfg, raw):
    lfm_cfg = _lfm_config(cfg)
    train_cfg = _build(
        net.TrainConfig,
        _section(cfg, "train", net.TrainConfig),
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    net_section = _section(cfg, "net", net.NetConfig)
    side = int(raw.shape[1])
    declared = net_section.get("input_side")
    if declared is not None and int(declared) != side:
        raise ConfigError(
            f"config net.input_side {declared} does not match corpus side {side}"
        )
    net_section["input_side"] = side
    if "branch_channels" in net_section:
        net_section["branch_channels"] = tuple(net_section["branch_channels"])
        net_section.setdefault("early_tap_channels", net_section["branch_channels"][0])
    net_cfg = _build(net.NetConfig, net_section, seed=args.seed)
    return lfm_cfg, train_cfg, net_cfg


def cmd_train(args) -> int:
    cfg = _load_config_file(args.config)
    manifest = load_manifest(args.manifest)
    raw, labels = load_arrays(manifest)
    lfm_cfg, train_cfg, net_cfg = _train_setup(args, cfg, raw)
    hf, lf = compute_freq_stacks(raw, lfm_cfg, jobs=args.jobs)
    model = net.init_model(net_cfg)
    trained, report = net.train_arrays(model, [hf, lf], labels, train_cfg)

    net.save_model(trained, args.model_out)
    report_path = args.report_out or f"{args.model_out}.report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _print(
        f"trained on {report.n_train} patches, holdout {report.n_holdout}: "
        f"accuracy {report.final_holdout_accuracy:.4f} -> {args.model_out}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config_file(args.config)
    section = _section(cfg, "synth", SynthConfig)
    if args.kinds is not None:
        section["kinds"] = tuple(tok.strip() for tok in args.kinds.split(",") if tok.strip())
    if args.no_dither:
        section["dither_negatives"] = False
    synth_cfg = _build(
        SynthConfig, section,
        count_per_class=args.count,
        side=args.side,
        bits=args.bits,
        seed=args.seed,
    )
    manifest = gen_dataset(synth_cfg, args.out_dir)
    neg, pos = manifest.class_counts()
    _print(f"wrote {len(manifest.records)} patches ({pos} banded / {neg} clean) "
           f"-> {manifest.path}")
    return EXIT_OK


def _eval_table(reports: dict) -> str:
    header = f"{'variant':<10} {'auroc':>8} {'auprc':>8} {'accuracy':>9} {'s/patch':>10}"
    lines = [header, "-" * len(header)]
    for name, rep in reports.items():
        spp = f"{rep.seconds_per_patch:.5f}" if np.isfinite(rep.seconds_per_patch) else "-"
        lines.append(f"{name:<10} {rep.auroc:>8.4f} {rep.auprc:>8.4f} "
                     f"{rep.accuracy:>9.4f} {spp:>10}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    cfg = _load_config_file(args.config)
    manifest = load_manifest(args.manifest)
    if (args.model is None) == (args.scores_csv is None):
        raise ConfigError("eval needs exactly one of --model or --scores-csv")

    if args.scores_csv is not None:
        scored = ingest_scores_csv(args.scores_csv, manifest)
        report = evaluate_scores(scored.scores, scored.labels)
        name = Path(args.scores_csv).stem
    else:
        model = _load_model(args.model)
        raw, labels = load_arrays(manifest)
        lfm_cfg = _lfm_config(cfg)
        hf, lf = compute_freq_stacks(raw, lfm_cfg, jobs=args.jobs)
        train_section = _section(cfg, "train", net.TrainConfig)
        split_ratio = float(train_section.get("split_ratio", 0.8))
        seed = args.seed if args.seed is not None else int(train_section.get("seed", 0))
        _, hold = net.split_indices(labels.size, split_ratio, seed)
        inputs = [hf, lf][: model.config.n_branches]
        scores = net.predict_batch(model, [x[hold] for x in inputs])
        spp = float("nan")
        # the timing harness needs a handful of patches to be meaningful;
        # on very small holdouts the table simply shows no speed figure
        if not args.no_speed and len(hold) >= 10:
            spp = benchmark_speed(model, raw[hold][:32], repetitions=3, lfm_cfg=lfm_cfg)
        report = evaluate_scores(scores, labels[hold], spp)
        name = "model"

    reports = {name: report}
    write_report_csv(reports, args.out)
    if args.json_out:
        write_report_json(reports, args.json_out)
    _print(_eval_table(reports))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config_file(args.config)
    manifest = load_manifest(args.manifest)
    variants = tuple(tok.strip() for tok in args.variants.split(",") if tok.strip())
    lfm_cfg = _lfm_config(cfg)
    train_cfg = _build(net.TrainConfig, _section(cfg, "train", net.TrainConfig),
                       epochs=args.epochs, seed=args.seed)
    net_section = _section(cfg, "net", net.NetConfig)
    if "branch_channels" in net_section:
        net_section["branch_channels"] = tuple(net_section["branch_channels"])
        net_section.setdefault("early_tap_channels", net_section["branch_channels"][0])
    net_section.setdefault("input_side", manifest.records[0].side)
    net_cfg = _build(net.NetConfig, net_section, seed=args.seed)
    reports = run_ablation(manifest, variants, train_cfg, net_cfg, lfm_cfg,
                           jobs=args.jobs, measure_speed=args.speed)
    write_report_csv(reports, args.out)
    if args.json_out:
        write_report_json(reports, args.json_out)
    _print(_eval_table(reports))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_config_file(args.config)
    model = _load_model(args.model)
    manifest = load_manifest(args.manifest)
    raw, _ = load_arrays(manifest)
    patches = raw[: args.n]
    spp = benchmark_speed(model, patches, repetitions=args.reps,
                          lfm_cfg=_lfm_config(cfg))
    payload = {
        "seconds_per_patch": spp,
        "n_patches": int(patches.shape[0]),
        "repetitions": args.reps,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _print(f"{spp:.6f} s/patch over {patches.shape[0]} patches "
           f"({args.reps} repetitions) -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsband",
        description="No-reference banding artifact detection via frequency-domain "
                    "patch classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_help="seed override"):
        p.add_argument("--config", help=f"JSON config file (fallback: ${CONFIG_ENV_VAR})")
        p.add_argument("--seed", type=int, help=seed_help)

    p = sub.add_parser("detect", help="score one image and write heatmap + JSON")
    p.add_argument("image", help="input image (PNG or PGM/PPM)")
    p.add_argument("model", help="trained model file")
    p.add_argument("--out-dir", default=".", help="where to write artifacts")
    p.add_argument("--pool-fraction", type=float, help="worst-percent pooling p")
    p.add_argument("--pool-scope", choices=("patch", "global"),
                   help="pool per patch (default) or over the whole map")
    p.add_argument("--threshold", type=float, help="banded-classification threshold")
    p.add_argument("--stats-csv",
                   help="also dump per-patch activity stats (k,cf,rf,sf,w)")
    add_common(p, "accepted for uniformity; detection is deterministic")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("train", help="train a detector from a corpus manifest")
    p.add_argument("manifest", help="JSONL corpus manifest")
    p.add_argument("--model-out", default="model.fsbd", help="output model path")
    p.add_argument("--report-out", help="training report JSON path")
    p.add_argument("--epochs", type=int, help="training epochs")
    p.add_argument("--batch-size", type=int, help="minibatch size")
    p.add_argument("--learning-rate", type=float, help="Adam learning rate")
    p.add_argument("--jobs", type=int, default=1, help="workers for map computation")
    add_common(p, "seed for init, split, and shuffling")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="generate a labeled synthetic banding corpus")
    p.add_argument("--out-dir", default="corpus", help="corpus output directory")
    p.add_argument("--count", type=int, help="patches per class")
    p.add_argument("--side", type=int, help="patch side in pixels")
    p.add_argument("--bits", type=_int_list, help="comma list of banding bit depths")
    p.add_argument("--kinds", help="comma list of background kinds")
    p.add_argument("--no-dither", action="store_true",
                   help="store smooth negatives without dithering")
    add_common(p, "corpus master seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="metrics for a model or an external score CSV")
    p.add_argument("manifest", help="JSONL corpus manifest")
    p.add_argument("--model", help="trained model file (evaluates its holdout split)")
    p.add_argument("--scores-csv", help="external (id,score) CSV instead of a model")
    p.add_argument("--out", default="eval_report.csv", help="report CSV path")
    p.add_argument("--json-out", help="also write the report as JSON")
    p.add_argument("--no-speed", action="store_true", help="skip the timing pass")
    p.add_argument("--jobs", type=int, default=1, help="workers for map computation")
    add_common(p, "split seed (must match training for a fair holdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score input-wiring variants")
    p.add_argument("manifest", help="JSONL corpus manifest")
    p.add_argument("--variants", default=",".join(ABLATION_VARIANTS),
                   help="comma list of variants to run")
    p.add_argument("--out", default="ablation.csv", help="report CSV path")
    p.add_argument("--json-out", help="also write the table as JSON")
    p.add_argument("--epochs", type=int, help="training epochs per variant")
    p.add_argument("--speed", action="store_true", help="also time each variant")
    p.add_argument("--jobs", type=int, default=1, help="workers for map computation")
    add_common(p, "shared seed for split and parameters")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="seconds-per-patch timing for a model")
    p.add_argument("model", help="trained model file")
    p.add_argument("manifest", help="manifest supplying timing patches")
    p.add_argument("--n", type=int, default=64, help="number of patches to time")
    p.add_argument("--reps", type=int, default=5, help="timing repetitions")
    p.add_argument("--out", default="bench_report.json", help="report JSON path")
    add_common(p, "accepted for uniformity; timing uses no randomness")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelFormatError as exc:
        print(f"fsband: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DegenerateDatasetError, SingleClassError) as exc:
        print(f"fsband: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FsbandError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"fsband: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
