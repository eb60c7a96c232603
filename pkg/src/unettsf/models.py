"""Forecasting models: the pyramid fusion model and three linear baselines.

Every model maps a window of shape (..., channels, input_len) to a
forecast of shape (..., channels, horizon), treating channels as fully
independent series. With individual=True each channel owns its weights;
otherwise one weight set is applied to every channel. Parameters live
in a plain name -> array dict whose insertion order is the canonical
serialization order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import ops
from .autodiff import Tape
from .errors import ConfigError, ShapeError
from .fpn import FpnConfig, build_fpn, level_lengths
from .rng import SplitMix64

MODEL_KINDS = ("unettsf", "linear", "nlinear", "dlinear")


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild a model: kind, sizes, pyramid, mode."""

    kind: str
    input_len: int
    horizon: int
    channels: int
    fpn: FpnConfig = field(default_factory=FpnConfig)
    individual: bool = True
    ma_kernel: int = 25

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind '{self.kind}' (choose from {MODEL_KINDS})")
        for label, value in (("input_len", self.input_len),
                             ("horizon", self.horizon),
                             ("channels", self.channels)):
            if value < 1:
                raise ConfigError(f"{label} must be positive, got {value}")
        if self.kind == "unettsf":
            # Both chains must survive all pooling stages; fails naming the stage.
            level_lengths(self.input_len, self.fpn)
            level_lengths(self.horizon, self.fpn)
        if self.kind == "dlinear":
            if self.ma_kernel < 1 or self.ma_kernel % 2 == 0:
                raise ConfigError(
                    f"ma_kernel must be odd and positive, got {self.ma_kernel}"
                )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_len": self.input_len,
            "horizon": self.horizon,
            "channels": self.channels,
            "stages": self.fpn.stages,
            "kernel": self.fpn.kernel,
            "stride": self.fpn.stride,
            "padding": self.fpn.padding,
            "individual": self.individual,
            "ma_kernel": self.ma_kernel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            kind=d["kind"],
            input_len=int(d["input_len"]),
            horizon=int(d["horizon"]),
            channels=int(d["channels"]),
            fpn=FpnConfig(
                stages=int(d.get("stages", 4)),
                kernel=int(d.get("kernel", 3)),
                stride=int(d.get("stride", 2)),
                padding=int(d.get("padding", 0)),
            ),
            individual=bool(d.get("individual", True)),
            ma_kernel=int(d.get("ma_kernel", 25)),
        )


def stage_output_lengths(horizon: int, cfg: FpnConfig) -> list[int]:
    """Forecast length at each pyramid level: [T, pool(T), pool(pool(T)), ...]."""
    return level_lengths(horizon, cfg)


def moving_average_decompose(x: np.ndarray, kernel: int):
    """Split a series into (trend, seasonal) with a centered moving average.

    The window is odd-sized and the series is extended by repeating the
    edge values, so trend has the same length as x; seasonal = x - trend.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"moving average kernel must be odd, got {kernel}")
    half = (kernel - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(half, half)]
    padded = np.pad(x, pad, mode="edge")
    trend = ops.avgpool1d_forward(padded, kernel, 1)
    return trend, x - trend


def _moving_average_backward(grad_trend: np.ndarray, length: int, kernel: int):
    """Adjoint of the trend map above (edge padding folds onto the ends)."""
    half = (kernel - 1) // 2
    g_padded = ops.avgpool1d_backward(grad_trend, length + 2 * half, kernel, 1)
    if half == 0:
        return g_padded
    grad = g_padded[..., half : half + length].copy()
    grad[..., 0] += g_padded[..., :half].sum(axis=-1)
    grad[..., -1] += g_padded[..., half + length :].sum(axis=-1)
    return grad


@dataclass
class Trace:
    """Bookkeeping from a taped forward, consumed by backward()."""

    tape: Tape
    param_ids: dict[str, int]
    seed_ids: list[list[int]]        # per channel: ids that receive the output grad
    input_ids: list[dict[str, int]]  # per channel: named leaf ids
    x_shape: tuple


class Model:
    """Shared plumbing: parameter layout, init, census, taped forward."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg

    # --- layout ----------------------------------------------------------

    def layer_shapes(self) -> list[tuple[str, int, int]]:
        """(name, n_in, n_out) of each affine, for one channel application."""
        raise NotImplementedError

    def channel_tags(self) -> list[str]:
        if self.cfg.individual:
            return [f"c{c}" for c in range(self.cfg.channels)]
        return ["shared"]

    def param_shapes(self) -> dict[str, tuple]:
        shapes: dict[str, tuple] = {}
        for tag in self.channel_tags():
            for name, n_in, n_out in self.layer_shapes():
                shapes[f"{tag}/{name}/w"] = (n_out, n_in)
                shapes[f"{tag}/{name}/b"] = (n_out,)
        return shapes

    def init_params(self, seed: int | SplitMix64) -> dict[str, np.ndarray]:
        rng = SplitMix64(seed) if isinstance(seed, int) else seed
        params: dict[str, np.ndarray] = {}
        for tag in self.channel_tags():
            for name, n_in, n_out in self.layer_shapes():
                w, b = ops.init_affine(n_in, n_out, rng)
                params[f"{tag}/{name}/w"] = w
                params[f"{tag}/{name}/b"] = b
        return params

    def count_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.param_shapes().values())

    def count_macs(self, batch: int) -> int:
        """Multiply-accumulates per forward pass of `batch` windows.

        Each affine costs n_in * n_out + n_out (the bias add counts as
        one MAC per output) and runs once per channel per window, both
        in individual and in shared mode. Pooling and moving averages
        contribute no multiplies; see pooling_adds for their additions.
        """
        per_channel = sum(n_in * n_out + n_out for _, n_in, n_out in self.layer_shapes())
        return batch * self.cfg.channels * per_channel

    def pooling_adds(self, batch: int) -> int:
        """Additions spent in pooling/averaging, reported separately."""
        return 0

    # --- execution --------------------------------------------------------

    def _tag(self, channel: int) -> str:
        return f"c{channel}" if self.cfg.individual else "shared"

    def _channel_forward(self, params, tag, xc, tape, pids):
        """Run one channel; returns (forecast, seed_ids, input_id_map)."""
        raise NotImplementedError

    def _run(self, params, x, tape: Optional[Tape]):
        cfg = self.cfg
        x = np.asarray(x, dtype=np.float64)
        if x.ndim < 2 or x.shape[-2] != cfg.channels or x.shape[-1] != cfg.input_len:
            raise ShapeError(
                f"expected window shape (..., {cfg.channels}, {cfg.input_len}), "
                f"got {x.shape}"
            )
        pids = (
            {name: tape.leaf() for name in self.param_shapes()}
            if tape is not None
            else {}
        )
        outs, seed_ids, input_ids = [], [], []
        for c in range(cfg.channels):
            yc, sids, iids = self._channel_forward(
                params, self._tag(c), x[..., c, :], tape, pids
            )
            outs.append(yc)
            seed_ids.append(sids)
            input_ids.append(iids)
        y = np.stack(outs, axis=-2)
        trace = Trace(tape, pids, seed_ids, input_ids, x.shape) if tape is not None else None
        return y, trace

    def forward(self, params: dict, x: np.ndarray) -> np.ndarray:
        y, _ = self._run(params, x, None)
        return y

    def forward_trace(self, params: dict, x: np.ndarray):
        y, trace = self._run(params, x, Tape())
        return y, trace

    def backward(self, trace: Trace, grad_forecast: np.ndarray, need_input: bool = True):
        """Gradients from a taped forward: (param_grads, input_grad).

        grad_forecast has the forecast's shape; parameter gradients are
        summed over batch and (in shared mode) over channels. Pass
        need_input=False to skip the input gradient (training only
        updates parameters).
        """
        if trace is None or trace.tape is None:
            raise ConfigError("backward needs a trace from forward_trace")
        grad_forecast = np.asarray(grad_forecast, dtype=np.float64)
        seeds = {}
        for c, sids in enumerate(trace.seed_ids):
            for sid in sids:
                seeds[sid] = grad_forecast[..., c, :]
        grads = trace.tape.gradients(seeds)
        shapes = self.param_shapes()
        param_grads = {
            name: grads.get(pid, np.zeros(shapes[name]))
            for name, pid in trace.param_ids.items()
        }
        input_grad = self._input_grad(trace, grads) if need_input else None
        return param_grads, input_grad

    def _input_grad(self, trace: Trace, grads: dict) -> np.ndarray:
        per_channel = []
        batch_shape = trace.x_shape[:-2]
        for c, iids in enumerate(trace.input_ids):
            g = grads.get(iids["x"])
            if g is None:
                g = np.zeros(batch_shape + (trace.x_shape[-1],))
            per_channel.append(g)
        return np.stack(per_channel, axis=-2)


class UnetTSF(Model):
    """Pyramid forecaster: pool the window into multi-scale levels, predict
    a forecast per level, then fuse deep to shallow by concatenating the
    refined deeper forecast with the current level's and mapping back to
    the level's length. The shallowest fused output is the forecast."""

    def __init__(self, cfg: ModelConfig):
        super().__init__(cfg)
        self.in_lengths = level_lengths(cfg.input_len, cfg.fpn)
        self.out_lengths = stage_output_lengths(cfg.horizon, cfg.fpn)

    def layer_shapes(self):
        s = self.cfg.fpn.stages
        layers = [
            (f"pred{i + 1}", self.in_lengths[i], self.out_lengths[i])
            for i in range(s)
        ]
        for i in range(s - 2, -1, -1):  # execution order, deepest fusion first
            layers.append(
                (f"fuse{i + 1}", self.out_lengths[i + 1] + self.out_lengths[i],
                 self.out_lengths[i])
            )
        return layers

    def pooling_adds(self, batch: int) -> int:
        k = self.cfg.fpn.kernel
        adds = sum(n * (k - 1) for n in self.in_lengths[1:])
        return batch * self.cfg.channels * adds

    def _channel_forward(self, params, tag, xc, tape, pids):
        fpn_cfg = self.cfg.fpn
        in_id = tape.leaf() if tape is not None else None
        levels = [(xc, in_id)]
        for _ in range(fpn_cfg.stages - 1):
            val, vid = levels[-1]
            levels.append(
                ad.avgpool1d(tape, val, vid, fpn_cfg.kernel, fpn_cfg.stride,
                             fpn_cfg.padding)
            )
        preds = []
        for i, (val, vid) in enumerate(levels):
            w, b = f"{tag}/pred{i + 1}/w", f"{tag}/pred{i + 1}/b"
            preds.append(
                ad.affine(tape, val, vid, params[w], pids.get(w),
                          params[b], pids.get(b))
            )
        fused, fid = preds[-1]
        for i in range(fpn_cfg.stages - 2, -1, -1):
            cat, cid = ad.concat(tape, fused, fid, preds[i][0], preds[i][1])
            w, b = f"{tag}/fuse{i + 1}/w", f"{tag}/fuse{i + 1}/b"
            fused, fid = ad.affine(tape, cat, cid, params[w], pids.get(w),
                                   params[b], pids.get(b))
        return fused, [fid] if tape is not None else [], {"x": in_id}

    def level_forecasts(self, params: dict, x: np.ndarray) -> list[np.ndarray]:
        """Per-level raw forecasts (before fusion), shallow to deep."""
        cfg = self.cfg
        x = np.asarray(x, dtype=np.float64)
        outs = []
        for c in range(cfg.channels):
            tag = self._tag(c)
            levels = build_fpn(x[..., c, :], cfg.fpn)
            outs.append([
                ops.affine_forward(levels[i], params[f"{tag}/pred{i + 1}/w"],
                                   params[f"{tag}/pred{i + 1}/b"])
                for i in range(cfg.fpn.stages)
            ])
        return [
            np.stack([outs[c][i] for c in range(cfg.channels)], axis=-2)
            for i in range(cfg.fpn.stages)
        ]


class Linear(Model):
    """One affine map from window to forecast per channel."""

    def layer_shapes(self):
        return [("map", self.cfg.input_len, self.cfg.horizon)]

    def _channel_forward(self, params, tag, xc, tape, pids):
        in_id = tape.leaf() if tape is not None else None
        w, b = f"{tag}/map/w", f"{tag}/map/b"
        out, oid = ad.affine(tape, xc, in_id, params[w], pids.get(w),
                             params[b], pids.get(b))
        return out, [oid] if tape is not None else [], {"x": in_id}


class NLinear(Model):
    """Affine map on the window re-anchored at its last value.

    The last value is subtracted before the map and added back after,
    so the model predicts offsets from the most recent observation.
    For gradients the anchor is treated as a constant (it carries no
    parameters), matching how the baseline is conventionally trained.
    """

    def layer_shapes(self):
        return [("map", self.cfg.input_len, self.cfg.horizon)]

    def _channel_forward(self, params, tag, xc, tape, pids):
        last = xc[..., -1:]
        shifted = xc - last
        in_id = tape.leaf() if tape is not None else None
        w, b = f"{tag}/map/w", f"{tag}/map/b"
        out, oid = ad.affine(tape, shifted, in_id, params[w], pids.get(w),
                             params[b], pids.get(b))
        return out + last, [oid] if tape is not None else [], {"x": in_id}

    def _input_grad(self, trace, grads):
        raise ConfigError(
            "input gradients are not defined for nlinear: the anchor value "
            "is treated as a constant"
        )


class DLinear(Model):
    """Trend/seasonal decomposition with one affine map per component.

    The moving-average trend and the seasonal remainder are forecast
    separately and summed.
    """

    def layer_shapes(self):
        return [
            ("seasonal", self.cfg.input_len, self.cfg.horizon),
            ("trend", self.cfg.input_len, self.cfg.horizon),
        ]

    def pooling_adds(self, batch: int) -> int:
        adds = self.cfg.input_len * (self.cfg.ma_kernel - 1)
        return batch * self.cfg.channels * adds

    def _channel_forward(self, params, tag, xc, tape, pids):
        trend, seasonal = moving_average_decompose(xc, self.cfg.ma_kernel)
        sid = tape.leaf() if tape is not None else None
        tid = tape.leaf() if tape is not None else None
        ws, bs = f"{tag}/seasonal/w", f"{tag}/seasonal/b"
        wt, bt = f"{tag}/trend/w", f"{tag}/trend/b"
        ys, ys_id = ad.affine(tape, seasonal, sid, params[ws], pids.get(ws),
                              params[bs], pids.get(bs))
        yt, yt_id = ad.affine(tape, trend, tid, params[wt], pids.get(wt),
                              params[bt], pids.get(bt))
        seed_ids = [ys_id, yt_id] if tape is not None else []
        return ys + yt, seed_ids, {"seasonal": sid, "trend": tid}

    def _input_grad(self, trace, grads):
        length, kernel = self.cfg.input_len, self.cfg.ma_kernel
        batch_shape = trace.x_shape[:-2]
        per_channel = []
        for iids in trace.input_ids:
            gs = grads.get(iids["seasonal"])
            gt = grads.get(iids["trend"])
            if gs is None:
                gs = np.zeros(batch_shape + (length,))
            if gt is None:
                gt = np.zeros(batch_shape + (length,))
            # seasonal = x - trend(x): the trend map sees gt - gs.
            per_channel.append(gs + _moving_average_backward(gt - gs, length, kernel))
        return np.stack(per_channel, axis=-2)


_CLASSES = {
    "unettsf": UnetTSF,
    "linear": Linear,
    "nlinear": NLinear,
    "dlinear": DLinear,
}


def build_model(cfg: ModelConfig) -> Model:
    return _CLASSES[cfg.kind](cfg)


def count_params(cfg: ModelConfig) -> int:
    return build_model(cfg).count_params()


def count_macs(cfg: ModelConfig, batch: int) -> int:
    return build_model(cfg).count_macs(batch)
