"""Training loop, evaluation, and checkpoint serialization.

Training minimizes MSE on the standardized scale with Adam, shuffling
the full window set each epoch from the run seed, keeping the last
partial batch, and summing gradients in a fixed order, so a seed pins
the whole trajectory. Validation MSE drives early stopping and the
returned parameters are the best-validation snapshot.

Checkpoints are a single binary file: magic "UTSF", little-endian
u32 version, u64 header length, a UTF-8 JSON header (model and train
config, data provenance, scaler statistics, ordered parameter
descriptors, RNG label, metrics), then the raw float32 little-endian
parameter values in descriptor order. Compute stays float64; storage
is float32, and `quantize` rounds live parameters to exactly what a
checkpoint would reload so recorded metrics reproduce bit-for-bit.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .data import RawSeries, SplitSpec, apply_scaler, window_origins
from .errors import CheckpointError, ConfigError, TrainingError
from .models import Model, ModelConfig, build_model
from .optim import AdamState, adam_step
from .rng import SplitMix64

MAGIC = b"UTSF"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    lr_decay: bool = True
    seed: int = 2021

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError(
                f"batch_size, max_epochs, patience must be positive, got "
                f"{self.batch_size}, {self.max_epochs}, {self.patience}"
            )

    def epoch_lr(self, epoch: int) -> float:
        """Flat for the first three epochs, then halved every epoch."""
        if not self.lr_decay or epoch <= 3:
            return self.lr
        return self.lr * 0.5 ** (epoch - 3)

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "lr_decay": self.lr_decay,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            lr=float(d.get("lr", 0.005)),
            batch_size=int(d.get("batch_size", 32)),
            max_epochs=int(d.get("max_epochs", 100)),
            patience=int(d.get("patience", 10)),
            lr_decay=bool(d.get("lr_decay", True)),
            seed=int(d.get("seed", 2021)),
        )


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float
    lr: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[EpochStats]
    best_epoch: int
    best_val_mse: float


def _gather(values_t: np.ndarray, origins: np.ndarray, input_len: int, horizon: int):
    """Stack windows at the given origins: (B, C, L) inputs, (B, C, T) targets.

    values_t is the scaled series transposed to (channels, rows).
    """
    idx_in = origins[:, None] + np.arange(-input_len, 0)[None, :]
    idx_out = origins[:, None] + np.arange(horizon)[None, :]
    return (
        values_t[:, idx_in].transpose(1, 0, 2),
        values_t[:, idx_out].transpose(1, 0, 2),
    )


def _mse_mae(model: Model, params: dict, values_t, origins, input_len, horizon,
             batch_size: int = 256):
    sq_sum = abs_sum = 0.0
    count = 0
    for lo in range(0, len(origins), batch_size):
        x, t = _gather(values_t, origins[lo : lo + batch_size], input_len, horizon)
        diff = model.forward(params, x) - t
        sq_sum += float(np.sum(diff * diff))
        abs_sum += float(np.sum(np.abs(diff)))
        count += diff.size
    return sq_sum / count, abs_sum / count


def train(
    model_cfg: ModelConfig,
    series: RawSeries,
    split: SplitSpec,
    cfg: TrainConfig,
    log=None,
) -> TrainResult:
    """Fit on the train partition, early-stop on validation MSE.

    Returns the parameters of the best validation epoch. Deterministic
    given (configs, data, seed); a non-finite loss or gradient aborts
    with a TrainingError naming where.
    """
    model = build_model(model_cfg)
    if series.n_channels != model_cfg.channels:
        raise ConfigError(
            f"model expects {model_cfg.channels} channels, "
            f"data has {series.n_channels}"
        )
    scaled = apply_scaler(series, split)
    values_t = np.ascontiguousarray(scaled.values.T)
    L, T = model_cfg.input_len, model_cfg.horizon
    train_origins = window_origins(scaled, split, "train", L, T)
    val_origins = window_origins(scaled, split, "val", L, T)

    rng = SplitMix64(cfg.seed)
    params = model.init_params(rng)
    states = {name: AdamState.for_param(p, name) for name, p in params.items()}

    history: list[EpochStats] = []
    best_epoch, best_val = 0, float("inf")
    best_params = {name: p.copy() for name, p in params.items()}
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        lr = cfg.epoch_lr(epoch)
        order = rng.permutation(len(train_origins))
        sq_sum, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = train_origins[order[lo : lo + cfg.batch_size]]
            x, t = _gather(values_t, batch, L, T)
            y, trace = model.forward_trace(params, x)
            loss, grad_y = ops.mse_loss(y, t)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, "
                    f"batch {lo // cfg.batch_size}"
                )
            grads, _ = model.backward(trace, grad_y, need_input=False)
            for name in params:
                params[name] = adam_step(params[name], grads[name], states[name], lr)
            sq_sum += loss * y.size
            count += y.size
        val_mse, _ = _mse_mae(model, params, values_t, val_origins, L, T)
        history.append(EpochStats(epoch, sq_sum / count, val_mse, lr))
        if log:
            log(f"epoch {epoch}: train_mse={sq_sum / count:.6f} "
                f"val_mse={val_mse:.6f} lr={lr:.2e}")
        if val_mse < best_val:
            best_val, best_epoch, stale = val_mse, epoch, 0
            best_params = {name: p.copy() for name, p in params.items()}
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return TrainResult(best_params, history, best_epoch, best_val)


def evaluate(
    params: dict,
    model_cfg: ModelConfig,
    series: RawSeries,
    split: SplitSpec,
    partition: str,
    batch_size: int = 256,
):
    """(MSE, MAE) over every window of a partition, standardized scale."""
    model = build_model(model_cfg)
    scaled = apply_scaler(series, split)
    values_t = np.ascontiguousarray(scaled.values.T)
    origins = window_origins(
        scaled, split, partition, model_cfg.input_len, model_cfg.horizon
    )
    return _mse_mae(
        model, params, values_t, origins,
        model_cfg.input_len, model_cfg.horizon, batch_size,
    )


def quantize(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Round parameters through float32, the checkpoint storage width."""
    return {k: v.astype(np.float32).astype(np.float64) for k, v in params.items()}


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    params: dict[str, np.ndarray]
    scaler_mean: list[float]
    scaler_std: list[float]
    train_cfg: TrainConfig | None = None
    data_meta: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    rng_label: str = SplitMix64.name


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    """Write the binary checkpoint; see the module docstring for layout."""
    descriptors = [
        {"name": name, "shape": list(value.shape)}
        for name, value in ckpt.params.items()
    ]
    header = {
        "model": ckpt.model_cfg.to_dict(),
        "train": ckpt.train_cfg.to_dict() if ckpt.train_cfg else None,
        "data": ckpt.data_meta,
        "scaler": {
            "mean": [float(v) for v in ckpt.scaler_mean],
            "std": [float(v) for v in ckpt.scaler_std],
        },
        "params": descriptors,
        "rng": ckpt.rng_label,
        "metrics": ckpt.metrics,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(v, dtype="<f4").tobytes() for v in ckpt.params.values()
    )
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Checkpoint:
    """Read and validate a checkpoint; parameters come back float64."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic in {path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} in {path} "
            f"(this build reads version {FORMAT_VERSION})"
        )
    (header_len,) = struct.unpack_from("<Q", raw, 8)
    if 16 + header_len > len(raw):
        raise CheckpointError(f"truncated checkpoint header in {path}")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header in {path}: {e}") from None
    try:
        model_cfg = ModelConfig.from_dict(header["model"])
        descriptors = header["params"]
        scaler = header["scaler"]
    except (KeyError, TypeError, ConfigError) as e:
        raise CheckpointError(f"invalid checkpoint header in {path}: {e}") from None

    expected = build_model(model_cfg).param_shapes()
    got = {d["name"]: tuple(d["shape"]) for d in descriptors}
    if got != expected:
        raise CheckpointError(
            f"parameter census mismatch in {path}: header lists "
            f"{len(got)} arrays / {sum(int(np.prod(s)) for s in got.values())} values, "
            f"model config needs {len(expected)} arrays / "
            f"{sum(int(np.prod(s)) for s in expected.values())} values"
        )
    n_values = sum(int(np.prod(d["shape"])) for d in descriptors)
    blob = raw[16 + header_len :]
    if len(blob) != 4 * n_values:
        raise CheckpointError(
            f"truncated parameter blob in {path}: expected {4 * n_values} bytes, "
            f"got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    params: dict[str, np.ndarray] = {}
    offset = 0
    for d in descriptors:
        size = int(np.prod(d["shape"]))
        params[d["name"]] = flat[offset : offset + size].reshape(d["shape"])
        offset += size
    train_cfg = TrainConfig.from_dict(header["train"]) if header.get("train") else None
    return Checkpoint(
        model_cfg=model_cfg,
        params=params,
        scaler_mean=scaler["mean"],
        scaler_std=scaler["std"],
        train_cfg=train_cfg,
        data_meta=header.get("data", {}),
        metrics=header.get("metrics", {}),
        rng_label=header.get("rng", ""),
    )
