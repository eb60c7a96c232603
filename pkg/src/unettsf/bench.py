"""Benchmark runner, efficiency profiler, and results reporting.

A plan is a JSON file: optional "train" overrides plus "entries", each
naming a dataset, variant (multivariate/univariate), model kind, window
sizes, and seeds. Every (entry, seed) pair is an independent job whose
outcome is one CSV row; rows are appended and flushed as jobs finish,
and a rerun skips pairs already recorded as ok, so an interrupted grid
resumes where it stopped. Failed jobs record their reason and do not
stop the rest.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from . import data as datamod
from .errors import ConfigError, DataError
from .fpn import FpnConfig
from .models import MODEL_KINDS, ModelConfig, build_model
from .trainer import TrainConfig, evaluate, quantize, train

RESULT_FIELDS = [
    "dataset", "protocol", "variant", "model", "L", "T", "seed",
    "mse", "mae", "params", "macs", "epochs", "seconds", "status",
]
VARIANTS = ("multivariate", "univariate")

# Canonical column order in reports; unknown models sort after, by name.
MODEL_ORDER = {kind: i for i, kind in enumerate(("unettsf", "dlinear", "nlinear", "linear"))}


@dataclass(frozen=True)
class PlanEntry:
    dataset: str
    variant: str
    model: str
    input_len: int
    horizon: int
    seeds: tuple[int, ...]
    protocol: str = ""  # empty -> dataset default
    stages: int = 4
    individual: bool = True
    ma_kernel: int = 25

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model '{self.model}' in plan entry")
        if not self.seeds:
            raise ConfigError("plan entry needs at least one seed")


@dataclass
class BenchPlan:
    entries: list[PlanEntry]
    train: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchPlan":
        known = {"entries", "train"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown plan keys: {sorted(extra)}")
        raw_entries = d.get("entries")
        if not raw_entries:
            raise ConfigError("plan has no entries")
        entries = []
        for i, e in enumerate(raw_entries):
            try:
                entries.append(
                    PlanEntry(
                        dataset=e["dataset"],
                        variant=e.get("variant", "multivariate"),
                        model=e["model"],
                        input_len=int(e["input_len"]),
                        horizon=int(e["horizon"]),
                        seeds=tuple(int(s) for s in e["seeds"]),
                        protocol=e.get("protocol", ""),
                        stages=int(e.get("stages", 4)),
                        individual=bool(e.get("individual", True)),
                        ma_kernel=int(e.get("ma_kernel", 25)),
                    )
                )
            except KeyError as k:
                raise ConfigError(f"plan entry {i} is missing key {k}") from None
        return cls(entries=entries, train=d.get("train", {}))


def load_plan(path: str) -> BenchPlan:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read plan {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"plan {path} is not valid JSON: {e}") from None
    return BenchPlan.from_dict(raw)


def default_plan() -> dict:
    """The stock grid: four ETT sets, four horizons, four models,
    both variants, three seeds, 336-step windows."""
    entries = []
    for dataset in ("etth1", "etth2", "ettm1", "ettm2"):
        for variant in VARIANTS:
            for horizon in (96, 192, 336, 720):
                for model in ("unettsf", "dlinear", "nlinear", "linear"):
                    entries.append({
                        "dataset": dataset,
                        "variant": variant,
                        "model": model,
                        "input_len": 336,
                        "horizon": horizon,
                        "seeds": [2021, 2022, 2023],
                    })
    return {"train": {}, "entries": entries}


def _model_config(entry: PlanEntry, channels: int) -> ModelConfig:
    return ModelConfig(
        kind=entry.model,
        input_len=entry.input_len,
        horizon=entry.horizon,
        channels=channels,
        fpn=FpnConfig(stages=entry.stages),
        individual=entry.individual,
        ma_kernel=entry.ma_kernel,
    )


def _job_key(entry: PlanEntry, seed: int) -> tuple:
    return (entry.dataset, entry.variant, entry.model,
            str(entry.input_len), str(entry.horizon), str(seed))


def _row_key(row: dict) -> tuple:
    return (row["dataset"], row["variant"], row["model"],
            row["L"], row["T"], row["seed"])


def run_job(entry: PlanEntry, seed: int, data_dir: str, train_overrides: dict) -> dict:
    """Train and test one (entry, seed) pair; always returns a row."""
    row = {
        "dataset": entry.dataset, "variant": entry.variant, "model": entry.model,
        "L": str(entry.input_len), "T": str(entry.horizon), "seed": str(seed),
        "protocol": "", "mse": "", "mae": "", "params": "", "macs": "",
        "epochs": "", "seconds": "", "status": "",
    }
    start = time.perf_counter()
    try:
        path, protocol, _ = datamod.resolve_dataset(entry.dataset, data_dir)
        protocol = entry.protocol or protocol
        row["protocol"] = protocol
        series = datamod.load_csv(path, name=entry.dataset)
        if entry.variant == "univariate":
            series = datamod.select_channel(series, -1)
        split = datamod.make_split(series, protocol)
        model_cfg = _model_config(entry, series.n_channels)
        train_cfg = TrainConfig.from_dict({**train_overrides, "seed": seed})
        result = train(model_cfg, series, split, train_cfg)
        params = quantize(result.params)
        mse, mae = evaluate(params, model_cfg, series, split, "test")
        model = build_model(model_cfg)
        row.update(
            mse=f"{mse:.6f}", mae=f"{mae:.6f}",
            params=str(model.count_params()),
            macs=str(model.count_macs(train_cfg.batch_size)),
            epochs=str(len(result.history)),
            seconds=f"{time.perf_counter() - start:.2f}",
            status="ok",
        )
    except Exception as e:  # record and move on; the grid must finish
        row["seconds"] = f"{time.perf_counter() - start:.2f}"
        row["status"] = f"error: {e}"
    return row


def _run_job_args(args):
    return run_job(*args)


def _completed_keys(results_path: str) -> set:
    done = set()
    if os.path.isfile(results_path):
        with open(results_path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row.get("status") == "ok":
                    done.add(_row_key(row))
    return done


def run_plan(
    plan: BenchPlan, data_dir: str, out_dir: str,
    workers: int = 1, log=None,
) -> list[dict]:
    """Run every missing (entry, seed) job; returns this run's rows.

    Appends to <out_dir>/results.csv as jobs complete and writes
    per-entry seed means to <out_dir>/summary.csv at the end.
    """
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    done = _completed_keys(results_path)
    jobs = [
        (entry, seed, data_dir, plan.train)
        for entry in plan.entries
        for seed in entry.seeds
        if _job_key(entry, seed) not in done
    ]
    if log:
        log(f"{len(jobs)} jobs to run, {len(done)} already recorded")
    new_file = not os.path.isfile(results_path)
    rows = []
    with open(results_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        if new_file:
            writer.writeheader()
            fh.flush()

        def emit(row):
            writer.writerow({k: row[k] for k in RESULT_FIELDS})
            fh.flush()
            rows.append(row)
            if log:
                log(f"{row['dataset']}/{row['variant']}/{row['model']} "
                    f"L={row['L']} T={row['T']} seed={row['seed']}: {row['status']}")

        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_job_args, job) for job in jobs]
                for fut in as_completed(futures):
                    emit(fut.result())
        else:
            for job in jobs:
                emit(_run_job_args(job))
    write_summary(results_path, os.path.join(out_dir, "summary.csv"))
    return rows


def _aggregate(results_path: str):
    """Mean metrics per (variant, dataset, L, T, model) over ok seeds.

    Returns (cells, skipped) where skipped counts malformed rows.
    """
    cells: dict[tuple, dict] = {}
    skipped = 0
    if not os.path.isfile(results_path):
        raise DataError(f"no results file at {results_path}")
    with open(results_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("status") != "ok":
                continue
            try:
                key = (row["variant"], row["dataset"], int(row["L"]), int(row["T"]),
                       row["model"])
                mse, mae = float(row["mse"]), float(row["mae"])
            except (KeyError, TypeError, ValueError):
                skipped += 1
                continue
            cell = cells.setdefault(key, {"mse": [], "mae": []})
            cell["mse"].append(mse)
            cell["mae"].append(mae)
    return cells, skipped


def write_summary(results_path: str, summary_path: str) -> None:
    cells, _ = _aggregate(results_path)
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "dataset", "L", "T", "model",
                         "seeds", "mse_mean", "mae_mean"])
        for key in sorted(cells):
            cell = cells[key]
            writer.writerow([
                key[0], key[1], key[2], key[3], key[4], len(cell["mse"]),
                f"{np.mean(cell['mse']):.6f}", f"{np.mean(cell['mae']):.6f}",
            ])


def report(results_path: str) -> str:
    """Comparison table: rows by dataset/horizon, columns by model,
    best mean per row starred (ties all starred)."""
    cells, skipped = _aggregate(results_path)
    if not cells:
        return f"{'dataset':<12}{'L':>5}{'T':>5}\n"
    lines = []
    if skipped:
        lines.append(f"note: skipped {skipped} malformed row(s)")
    variants = sorted({k[0] for k in cells})
    for variant in variants:
        sub = {k: v for k, v in cells.items() if k[0] == variant}
        model_names = sorted(
            {k[4] for k in sub},
            key=lambda m: (MODEL_ORDER.get(m, len(MODEL_ORDER)), m),
        )
        lines.append(f"== {variant} (mean over seeds; * = best per row) ==")
        header = f"{'dataset':<12}{'L':>5}{'T':>5}"
        for m in model_names:
            header += f"{m + ' mse':>16}{m + ' mae':>16}"
        lines.append(header)
        row_keys = sorted({(k[1], k[2], k[3]) for k in sub})
        for dataset, L, T in row_keys:
            values = {
                m: sub.get((variant, dataset, L, T, m)) for m in model_names
            }
            best_mse = min(np.mean(v["mse"]) for v in values.values() if v)
            best_mae = min(np.mean(v["mae"]) for v in values.values() if v)
            line = f"{dataset:<12}{L:>5}{T:>5}"
            for m in model_names:
                v = values[m]
                if v is None:
                    line += f"{'-':>16}{'-':>16}"
                    continue
                mse, mae = np.mean(v["mse"]), np.mean(v["mae"])
                star_mse = "*" if mse <= best_mse else " "
                star_mae = "*" if mae <= best_mae else " "
                line += f"{mse:>15.3f}{star_mse}{mae:>15.3f}{star_mae}"
            lines.append(line)
        lines.append("")
    return "\n".join(lines) + "\n"


@dataclass
class LayerProfile:
    name: str
    n_in: int
    n_out: int
    params: int  # over all channel copies
    macs: int    # over channels and batch


@dataclass
class ProfileResult:
    params: int
    macs: int
    batch: int
    layers: list[LayerProfile]
    pooling_adds: int


def profile(model_cfg: ModelConfig, batch: int) -> ProfileResult:
    """Closed-form parameter and multiply-accumulate census."""
    if batch < 1:
        raise ConfigError(f"batch must be positive, got {batch}")
    model = build_model(model_cfg)
    copies = model_cfg.channels if model_cfg.individual else 1
    layers = [
        LayerProfile(
            name=name, n_in=n_in, n_out=n_out,
            params=copies * (n_in * n_out + n_out),
            macs=batch * model_cfg.channels * (n_in * n_out + n_out),
        )
        for name, n_in, n_out in model.layer_shapes()
    ]
    return ProfileResult(
        params=model.count_params(),
        macs=model.count_macs(batch),
        batch=batch,
        layers=layers,
        pooling_adds=model.pooling_adds(batch),
    )
