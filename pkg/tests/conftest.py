"""Shared test helpers: independent oracles and synthetic data builders.

The oracles here are deliberately written as naive loops, separate from
the library's vectorized implementations, so each side checks the other.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

from unettsf.rng import SplitMix64


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f() wrt array x (in place)."""
    grad = np.zeros(x.shape, dtype=np.float64)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = f()
        flat_x[i] = orig - h
        f_minus = f()
        flat_x[i] = orig
        flat_g[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def assert_grads_close(analytic, numeric, rel=1e-5, floor=1e-3, label=""):
    """|a - n| <= rel * max(floor, |a|, |n|) elementwise."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    assert analytic.shape == numeric.shape, label
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    worst = float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
    assert worst <= rel, f"{label}: relative gradient error {worst:.3e} > {rel:.0e}"


def brute_avgpool(x, kernel: int, stride: int, padding: int = 0) -> list[float]:
    """Reference pooling: explicit window loop over a padded python list."""
    xs = [0.0] * padding + [float(v) for v in x] + [0.0] * padding
    out = []
    i = 0
    while i + kernel <= len(xs):
        out.append(sum(xs[i : i + kernel]) / kernel)
        i += stride
    return out


def brute_window_count(start: int, end: int, n_rows: int, input_len: int,
                       horizon: int) -> int:
    """Count valid origins by checking every row against the definition."""
    count = 0
    stop = min(end, n_rows)
    for origin in range(n_rows + 1):
        if origin - input_len >= 0 and origin >= start and origin + horizon <= stop:
            count += 1
    return count


def write_csv(path, values: np.ndarray, columns=None, start="2020-01-01 00:00:00"):
    """Write a benchmark-layout CSV from an (n, c) array."""
    values = np.asarray(values, dtype=np.float64)
    n, c = values.shape
    columns = columns or [f"v{i}" for i in range(c)]
    with open(path, "w") as fh:
        fh.write("date," + ",".join(columns) + "\n")
        for t in range(n):
            cells = ",".join(f"{values[t, j]:.10g}" for j in range(c))
            fh.write(f"t{t:06d},{cells}\n")
    return str(path)


def synthetic_series(n: int, channels: int, seed: int = 5) -> np.ndarray:
    """Smooth mixed-frequency signals plus noise; no constant channel."""
    rng = SplitMix64(seed)
    t = np.arange(n, dtype=np.float64)
    values = np.empty((n, channels))
    for c in range(channels):
        freq = 0.013 * (c + 1)
        phase = rng.random() * 6.28
        amp = 0.5 + rng.random()
        noise = rng.uniform(-0.1, 0.1, n)
        drift = (rng.random() - 0.5) * 0.002
        values[:, c] = amp * np.sin(freq * t + phase) + drift * t + noise
    return values


@pytest.fixture(scope="session")
def tiny_csv(tmp_path_factory):
    """200-row, 3-channel dataset for end-to-end runs."""
    path = tmp_path_factory.mktemp("data") / "tiny.csv"
    return write_csv(path, synthetic_series(200, 3))


def dataset_dir() -> str:
    return os.environ.get("UNETTSF_DATA_DIR", os.path.join(os.sep, "data"))


def has_dataset(filename: str) -> bool:
    return os.path.isfile(os.path.join(dataset_dir(), filename))


needs_etth1 = pytest.mark.skipif(
    not has_dataset("ETTh1.csv"),
    reason="ETTh1.csv not present under UNETTSF_DATA_DIR; place the benchmark "
    "CSVs there to run the accuracy criteria",
)
