"""Command-line interface.

Subcommands: train, eval, benchmark, profile, decompose. All flags have
defaults visible in --help; `train` additionally accepts --config, a
flat JSON file whose keys mirror the flag names, with explicit flags
taking precedence over the file and the file over built-in defaults.
The fully resolved configuration of a run is echoed into its output
directory. Failures map to stable exit codes: 2 config, 3 data,
4 training abort, 5 checkpoint; the reason is one line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench as benchmod
from . import data as datamod
from .errors import CheckpointError, ConfigError, DataError, TrainingError
from .fpn import FpnConfig, build_fpn
from .models import ModelConfig
from .trainer import (
    Checkpoint,
    TrainConfig,
    evaluate,
    load_checkpoint,
    quantize,
    save_checkpoint,
    train,
)

DEFAULT_SEED = 2021


def _data_dir_default() -> str:
    return os.environ.get("UNETTSF_DATA_DIR", ".")


def _add_model_flags(p, sup):
    p.add_argument("--model", choices=("unettsf", "linear", "nlinear", "dlinear"),
                   default=sup("unettsf"), help="model kind")
    p.add_argument("--input-len", type=int, default=sup(336),
                   help="window length fed to the model")
    p.add_argument("--horizon", type=int, default=sup(96),
                   help="forecast length")
    p.add_argument("--stages", type=int, default=sup(4), help="pyramid levels")
    p.add_argument("--kernel", type=int, default=sup(3), help="pooling kernel")
    p.add_argument("--stride", type=int, default=sup(2), help="pooling stride")
    p.add_argument("--padding", type=int, default=sup(0), help="pooling padding")
    p.add_argument("--individual", action=argparse.BooleanOptionalAction,
                   default=sup(True), help="per-channel weights")
    p.add_argument("--ma-kernel", type=int, default=sup(25),
                   help="decomposition moving-average window (dlinear)")


def _build_parser(suppress: bool) -> argparse.ArgumentParser:
    """The real parser (suppress=False) or a twin whose namespace only
    contains flags the user actually passed (suppress=True)."""

    def sup(default):
        return argparse.SUPPRESS if suppress else default

    parser = argparse.ArgumentParser(
        prog="unettsf",
        description="Multi-scale pooling forecaster and linear baselines",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="cmd", required=True)
    kw = dict(formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = sub.add_parser("train", help="fit a model and write a checkpoint", **kw)
    _add_model_flags(p, sup)
    p.add_argument("--dataset", default=sup(None),
                   help="registry name (etth1, ettm2, ...) or CSV path")
    p.add_argument("--data-dir", default=sup(_data_dir_default()),
                   help="dataset root (env UNETTSF_DATA_DIR)")
    p.add_argument("--protocol", choices=datamod.PROTOCOLS, default=sup(None),
                   help="split protocol (default: per dataset)")
    p.add_argument("--variant", choices=benchmod.VARIANTS,
                   default=sup("multivariate"),
                   help="all channels, or the last (target) channel only")
    p.add_argument("--lr", type=float, default=sup(0.005), help="Adam learning rate")
    p.add_argument("--batch-size", type=int, default=sup(32), help="windows per step")
    p.add_argument("--max-epochs", type=int, default=sup(100), help="epoch cap")
    p.add_argument("--patience", type=int, default=sup(10),
                   help="epochs without val improvement before stopping")
    p.add_argument("--lr-decay", action=argparse.BooleanOptionalAction,
                   default=sup(True), help="halve lr each epoch after the third")
    p.add_argument("--seed", type=int, default=sup(DEFAULT_SEED),
                   help="seed for init and shuffling")
    p.add_argument("--out", default=sup("runs/latest"), help="output directory")
    p.add_argument("--config", default=sup(None),
                   help="JSON file of flag values (flags win)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a partition", **kw)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--partition", choices=("train", "val", "test"),
                   default=sup("test"), help="rows to evaluate")
    p.add_argument("--dataset", default=sup(None),
                   help="override the dataset recorded in the checkpoint")
    p.add_argument("--data-dir", default=sup(_data_dir_default()),
                   help="dataset root (env UNETTSF_DATA_DIR)")
    p.add_argument("--out", default=sup(None), help="directory for metrics.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="run a plan of train/eval jobs", **kw)
    p.add_argument("--plan", default=sup(None), help="plan JSON file")
    p.add_argument("--data-dir", default=sup(_data_dir_default()),
                   help="dataset root (env UNETTSF_DATA_DIR)")
    p.add_argument("--out", default=sup("bench_out"), help="output directory")
    p.add_argument("--workers", type=int, default=sup(1),
                   help="parallel jobs (1 = in-process)")
    p.add_argument("--report-only", action="store_true",
                   default=sup(False), help="only rebuild reports from results.csv")
    p.add_argument("--write-default-plan", default=sup(None), metavar="PATH",
                   help="write the stock grid as a plan file and exit")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("profile", help="parameter and MAC census", **kw)
    _add_model_flags(p, sup)
    p.add_argument("--channels", type=int, default=sup(7), help="series channels")
    p.add_argument("--batch", type=int, default=sup(32), help="windows per forward")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("decompose", help="dump the pooling pyramid of one channel", **kw)
    p.add_argument("--dataset", required=True,
                   help="registry name or CSV path")
    p.add_argument("--data-dir", default=sup(_data_dir_default()),
                   help="dataset root (env UNETTSF_DATA_DIR)")
    p.add_argument("--channel", type=int, default=sup(0), help="channel index")
    p.add_argument("--stages", type=int, default=sup(4), help="pyramid levels")
    p.add_argument("--kernel", type=int, default=sup(3), help="pooling kernel")
    p.add_argument("--stride", type=int, default=sup(2), help="pooling stride")
    p.add_argument("--padding", type=int, default=sup(0), help="pooling padding")
    p.add_argument("--out", default=sup(None), help="output CSV (default stdout)")
    p.set_defaults(func=cmd_decompose)
    return parser


TRAIN_CONFIG_KEYS = {
    "model", "input_len", "horizon", "stages", "kernel", "stride", "padding",
    "individual", "ma_kernel", "dataset", "data_dir", "protocol", "variant",
    "lr", "batch_size", "max_epochs", "patience", "lr_decay", "seed", "out",
}


def _merge_train_config(ns: argparse.Namespace, argv: list[str]) -> dict:
    """defaults < config file < explicit flags."""
    merged = {k: v for k, v in vars(ns).items() if k not in ("func", "cmd")}
    if not ns.config:
        return merged
    twin = _build_parser(suppress=True)
    provided = vars(twin.parse_args(argv))
    try:
        with open(ns.config) as fh:
            file_cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {ns.config}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {ns.config} is not valid JSON: {e}") from None
    if not isinstance(file_cfg, dict):
        raise ConfigError(f"config {ns.config} must be a JSON object")
    unknown = set(file_cfg) - TRAIN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in file_cfg.items():
        if key not in provided:
            merged[key] = value
    return merged


def _echo_config(out_dir: str, resolved: dict) -> None:
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model_config(c: dict, channels: int) -> ModelConfig:
    return ModelConfig(
        kind=c["model"],
        input_len=int(c["input_len"]),
        horizon=int(c["horizon"]),
        channels=channels,
        fpn=FpnConfig(stages=int(c["stages"]), kernel=int(c["kernel"]),
                      stride=int(c["stride"]), padding=int(c["padding"])),
        individual=bool(c["individual"]),
        ma_kernel=int(c["ma_kernel"]),
    )


def _load_series(c: dict):
    if not c.get("dataset"):
        raise ConfigError("dataset is required (--dataset flag or config key)")
    path, default_protocol, name = datamod.resolve_dataset(c["dataset"], c["data_dir"])
    protocol = c.get("protocol") or default_protocol
    series = datamod.load_csv(path, name=name)
    if c.get("variant", "multivariate") == "univariate":
        series = datamod.select_channel(series, -1)
    return series, protocol, name, path


def cmd_train(ns: argparse.Namespace, argv: list[str]) -> int:
    c = _merge_train_config(ns, argv)
    series, protocol, name, path = _load_series(c)
    c["protocol"] = protocol
    model_cfg = _model_config(c, series.n_channels)
    train_cfg = TrainConfig(
        lr=float(c["lr"]), batch_size=int(c["batch_size"]),
        max_epochs=int(c["max_epochs"]), patience=int(c["patience"]),
        lr_decay=bool(c["lr_decay"]), seed=int(c["seed"]),
    )
    out_dir = c["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(out_dir, {k: v for k, v in c.items() if k != "config"})

    split = datamod.make_split(series, protocol)
    result = train(model_cfg, series, split, train_cfg, log=print)
    params = quantize(result.params)
    val_mse, val_mae = evaluate(params, model_cfg, series, split, "val")
    test_mse, test_mae = evaluate(params, model_cfg, series, split, "test")
    metrics = {
        "best_epoch": result.best_epoch,
        "epochs": len(result.history),
        "val_mse": val_mse, "val_mae": val_mae,
        "test_mse": test_mse, "test_mae": test_mae,
    }
    ckpt = Checkpoint(
        model_cfg=model_cfg, params=params,
        scaler_mean=split.mean.tolist(), scaler_std=split.std.tolist(),
        train_cfg=train_cfg,
        data_meta={"dataset": c["dataset"], "file": os.path.basename(path),
                   "protocol": protocol,
                   "variant": c.get("variant", "multivariate")},
        metrics=metrics,
    )
    ckpt_path = os.path.join(out_dir, "checkpoint.utsf")
    save_checkpoint(ckpt_path, ckpt)
    with open(os.path.join(out_dir, "history.csv"), "w") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for s in result.history:
            fh.write(f"{s.epoch},{s.train_mse:.12g},{s.val_mse:.12g}\n")
    print(f"best_epoch={result.best_epoch} val_mse={val_mse:.6f} "
          f"test_mse={test_mse:.6f} test_mae={test_mae:.6f}")
    print(f"checkpoint={ckpt_path}")
    return 0


def cmd_eval(ns: argparse.Namespace, argv: list[str]) -> int:
    ckpt = load_checkpoint(ns.checkpoint)
    meta = ckpt.data_meta
    c = {
        "dataset": ns.dataset or meta.get("dataset"),
        "data_dir": ns.data_dir,
        "protocol": meta.get("protocol"),
        "variant": meta.get("variant", "multivariate"),
    }
    series, protocol, _, _ = _load_series(c)
    split = datamod.make_split(series, protocol)
    stored_mean = np.asarray(ckpt.scaler_mean, dtype=np.float64)
    stored_std = np.asarray(ckpt.scaler_std, dtype=np.float64)
    if stored_mean.shape[0] != series.n_channels:
        raise CheckpointError(
            f"checkpoint scaler covers {stored_mean.shape[0]} channels, "
            f"dataset has {series.n_channels}"
        )
    split.mean, split.std = stored_mean, stored_std
    mse, mae = evaluate(ckpt.params, ckpt.model_cfg, series, split, ns.partition)
    print(f"partition={ns.partition} mse={mse:.12g} mae={mae:.12g}")
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        with open(os.path.join(ns.out, "metrics.csv"), "w") as fh:
            fh.write("partition,mse,mae\n")
            fh.write(f"{ns.partition},{mse:.12g},{mae:.12g}\n")
    return 0


def cmd_benchmark(ns: argparse.Namespace, argv: list[str]) -> int:
    if ns.write_default_plan:
        with open(ns.write_default_plan, "w") as fh:
            json.dump(benchmod.default_plan(), fh, indent=2)
            fh.write("\n")
        print(f"plan={ns.write_default_plan}")
        return 0
    if not ns.plan:
        raise ConfigError("--plan is required (or --write-default-plan PATH)")
    plan = benchmod.load_plan(ns.plan)
    out_dir = ns.out
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    if not ns.report_only:
        _echo_config(out_dir, {
            "plan": os.path.abspath(ns.plan), "data_dir": ns.data_dir,
            "workers": ns.workers, "out": out_dir,
        })
        benchmod.run_plan(plan, ns.data_dir, out_dir, workers=ns.workers, log=print)
    text = benchmod.report(results_path)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(text)
    benchmod.write_summary(results_path, os.path.join(out_dir, "summary.csv"))
    print(text, end="")
    return 0


def cmd_profile(ns: argparse.Namespace, argv: list[str]) -> int:
    cfg = _model_config(vars(ns), ns.channels)
    p = benchmod.profile(cfg, ns.batch)
    print(f"params={p.params} macs={p.macs}")
    for layer in p.layers:
        print(f"  {layer.name:<10} in={layer.n_in:<6} out={layer.n_out:<6} "
              f"params={layer.params:<10} macs={layer.macs}")
    print(f"pooling_adds={p.pooling_adds} (batch={p.batch}, not counted as macs)")
    return 0


def cmd_decompose(ns: argparse.Namespace, argv: list[str]) -> int:
    path, _, name = datamod.resolve_dataset(ns.dataset, ns.data_dir)
    series = datamod.load_csv(path, name=name)
    if not 0 <= ns.channel < series.n_channels:
        raise ConfigError(
            f"channel {ns.channel} out of range: {name} has {series.n_channels}"
        )
    fpn_cfg = FpnConfig(stages=ns.stages, kernel=ns.kernel,
                        stride=ns.stride, padding=ns.padding)
    levels = build_fpn(series.values[:, ns.channel], fpn_cfg)
    header = ",".join(f"level_{i + 1}" for i in range(len(levels)))
    lines = [header]
    for row in range(levels[0].shape[-1]):
        cells = [
            f"{lvl[row]:.12g}" if row < lvl.shape[-1] else "" for lvl in levels
        ]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as fh:
            fh.write(text)
        print(f"decomposition={ns.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser(suppress=False)
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return ns.func(ns, argv)
    except ConfigError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"error: data: {e}", file=sys.stderr)
        return 3
    except TrainingError as e:
        print(f"error: training: {e}", file=sys.stderr)
        return 4
    except CheckpointError as e:
        print(f"error: checkpoint: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
