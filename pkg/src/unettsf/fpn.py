"""Multi-scale pyramid over the series axis.

Level 1 is the input itself; each further level is the previous one
average-pooled (kernel 3, stride 2, no padding by default), so the
series gets roughly halved per level while amplitudes stay bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError

MAX_STAGES = 6


@dataclass(frozen=True)
class FpnConfig:
    """Pyramid shape: number of levels and the pooling window."""

    stages: int = 4
    kernel: int = 3
    stride: int = 2
    padding: int = 0

    def __post_init__(self):
        if not 1 <= self.stages <= MAX_STAGES:
            raise ConfigError(f"stages must be in 1..{MAX_STAGES}, got {self.stages}")
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ConfigError(
                f"invalid pooling: kernel={self.kernel} stride={self.stride} "
                f"padding={self.padding}"
            )


def level_lengths(length: int, cfg: FpnConfig) -> list[int]:
    """Series length at each of the cfg.stages levels, shallow to deep.

    Raises ConfigError naming the first stage whose input is too short
    to pool (or whose output would be empty).
    """
    if length < 1:
        raise ConfigError(f"series length must be positive, got {length}")
    lengths = [length]
    for stage in range(2, cfg.stages + 1):
        prev = lengths[-1]
        if prev + 2 * cfg.padding < cfg.kernel:
            raise ConfigError(
                f"stage {stage}: cannot pool length {prev} with kernel "
                f"{cfg.kernel} (padding {cfg.padding})"
            )
        nxt = ops.pooled_length(prev, cfg.kernel, cfg.stride, cfg.padding)
        if nxt < 1:
            raise ConfigError(f"stage {stage}: pooled length collapses to {nxt}")
        lengths.append(nxt)
    return lengths


def build_fpn(x: np.ndarray, cfg: FpnConfig) -> list[np.ndarray]:
    """Pyramid levels [x, pool(x), pool(pool(x)), ...] along the last axis."""
    level_lengths(x.shape[-1], cfg)
    levels = [x]
    for _ in range(cfg.stages - 1):
        levels.append(
            ops.avgpool1d_forward(levels[-1], cfg.kernel, cfg.stride, cfg.padding)
        )
    return levels


def build_fpn_backward(grad_levels: list[np.ndarray], cfg: FpnConfig) -> np.ndarray:
    """Accumulate per-level gradients back into the input gradient.

    Every level branches off the pooling chain, so the input gradient is
    the sum of each level's gradient pulled back through its poolings.
    """
    if len(grad_levels) != cfg.stages:
        raise ConfigError(
            f"expected {cfg.stages} level gradients, got {len(grad_levels)}"
        )
    grad = grad_levels[-1]
    for level in range(cfg.stages - 2, -1, -1):
        length = grad_levels[level].shape[-1]
        expect = ops.pooled_length(length, cfg.kernel, cfg.stride, cfg.padding)
        if grad.shape[-1] != expect:
            raise ConfigError(
                f"level {level + 2} gradient has length {grad.shape[-1]}, "
                f"but pooling {length} gives {expect}"
            )
        grad = (
            ops.avgpool1d_backward(grad, length, cfg.kernel, cfg.stride, cfg.padding)
            + grad_levels[level]
        )
    return grad
