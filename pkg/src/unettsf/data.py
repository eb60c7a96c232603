"""CSV loading, benchmark splits, scaling, and sliding windows.

Files follow the common long-horizon benchmark layout: a `date` column
followed by one numeric column per channel, one row per time step.
Splits address rows by target position: a window may reach back into
the preceding partition for its input history, but its target rows
always lie inside the partition, so no target leaks across partitions.
Scaling is per-channel z-score with statistics fitted on training rows
only; metrics elsewhere are computed on this standardized scale.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from .errors import DataError

PROTOCOLS = ("ett_hourly", "ett_minute", "ratio_7_1_2")

# Months of 30 days at the recording granularity: 12 train, 4 val, 4 test.
_ETT_HOURLY_ROWS = (8640, 11520, 14400)
_ETT_MINUTE_ROWS = (34560, 46080, 57600)

# name -> (filename, default protocol)
DATASETS = {
    "etth1": ("ETTh1.csv", "ett_hourly"),
    "etth2": ("ETTh2.csv", "ett_hourly"),
    "ettm1": ("ETTm1.csv", "ett_minute"),
    "ettm2": ("ETTm2.csv", "ett_minute"),
    "weather": ("weather.csv", "ratio_7_1_2"),
    "traffic": ("traffic.csv", "ratio_7_1_2"),
    "electricity": ("electricity.csv", "ratio_7_1_2"),
    "exchange": ("exchange_rate.csv", "ratio_7_1_2"),
    "ili": ("national_illness.csv", "ratio_7_1_2"),
}


@dataclass
class RawSeries:
    """A loaded dataset: rows are time steps, columns are channels."""

    name: str
    timestamps: list[str]
    values: np.ndarray  # (rows, channels) float64
    columns: list[str]
    granularity: str = ""

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


@dataclass
class SplitSpec:
    """Partition row ranges plus the train-fitted scaler statistics."""

    protocol: str
    ranges: dict[str, tuple[int, int]]  # partition -> [start, end) target rows
    mean: np.ndarray  # (channels,)
    std: np.ndarray   # (channels,)


@dataclass
class TimeSeriesWindow:
    """One training example: history, future, and the first target row."""

    input: np.ndarray   # (channels, input_len)
    target: np.ndarray  # (channels, horizon)
    origin: int


def load_csv(path: str, name: str | None = None) -> RawSeries:
    """Read a benchmark CSV; fails naming the first offending cell.

    Rows in error messages count data rows from 1; columns count file
    columns from 1 (so the first value column is column 2).
    """
    if not os.path.isfile(path):
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty dataset file: {path}") from None
        if not header or header[0].strip().lower() != "date":
            raise DataError(
                f"first column must be 'date', got '{header[0] if header else ''}' in {path}"
            )
        columns = [h.strip() for h in header[1:]]
        if not columns:
            raise DataError(f"no value columns in {path}")
        timestamps: list[str] = []
        rows: list[list[float]] = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(
                    f"row {i} has {len(row)} cells, expected {len(header)} in {path}"
                )
            timestamps.append(row[0])
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError:
                for j, cell in enumerate(row[1:], start=2):
                    try:
                        float(cell)
                    except ValueError:
                        raise DataError(
                            f"cannot parse '{cell.strip()}' at row {i}, column {j} in {path}"
                        ) from None
                raise
    if not rows:
        raise DataError(f"no data rows in {path}")
    values = np.asarray(rows, dtype=np.float64)
    return RawSeries(
        name=name or os.path.splitext(os.path.basename(path))[0],
        timestamps=timestamps,
        values=values,
        columns=columns,
    )


def resolve_dataset(name_or_path: str, data_dir: str):
    """Map a registry name or a literal path to (path, protocol, name)."""
    key = name_or_path.lower()
    if key in DATASETS:
        filename, protocol = DATASETS[key]
        return os.path.join(data_dir, filename), protocol, key
    if os.path.isfile(name_or_path):
        stem = os.path.splitext(os.path.basename(name_or_path))[0]
        return name_or_path, "ratio_7_1_2", stem
    raise DataError(
        f"unknown dataset '{name_or_path}': not a registry name "
        f"({', '.join(sorted(DATASETS))}) and not an existing file"
    )


def select_channel(series: RawSeries, index: int = -1) -> RawSeries:
    """Single-channel view of one column (default: the last, the target)."""
    if not -series.n_channels <= index < series.n_channels:
        raise DataError(
            f"channel index {index} out of range for {series.n_channels} channels"
        )
    return replace(
        series,
        values=series.values[:, [index]],
        columns=[series.columns[index]],
    )


def make_split(series: RawSeries, protocol: str) -> SplitSpec:
    """Partition rows per protocol and fit the z-score scaler on train rows."""
    n = series.n_rows
    if protocol in ("ett_hourly", "ett_minute"):
        marks = _ETT_HOURLY_ROWS if protocol == "ett_hourly" else _ETT_MINUTE_ROWS
        if n < marks[-1]:
            raise DataError(
                f"protocol {protocol} needs {marks[-1]} rows, "
                f"{series.name} has {n}"
            )
        ranges = {
            "train": (0, marks[0]),
            "val": (marks[0], marks[1]),
            "test": (marks[1], marks[2]),
        }
    elif protocol == "ratio_7_1_2":
        n_train = int(0.7 * n)
        n_test = int(0.2 * n)
        n_val = n - n_train - n_test
        if n_train < 2:
            raise DataError(f"{series.name} too short to split: {n} rows")
        ranges = {
            "train": (0, n_train),
            "val": (n_train, n_train + n_val),
            "test": (n_train + n_val, n),
        }
    else:
        raise DataError(f"unknown protocol '{protocol}' (choose from {PROTOCOLS})")
    train_rows = series.values[: ranges["train"][1]]
    mean = train_rows.mean(axis=0)
    std = train_rows.std(axis=0)
    for c in np.flatnonzero(std == 0.0):
        raise DataError(
            f"channel '{series.columns[c]}' is constant over the training rows"
        )
    return SplitSpec(protocol=protocol, ranges=ranges, mean=mean, std=std)


def apply_scaler(series: RawSeries, spec: SplitSpec) -> RawSeries:
    """Standardize every row with the train-fitted statistics."""
    if series.n_channels != spec.mean.shape[0]:
        raise DataError(
            f"scaler fitted for {spec.mean.shape[0]} channels, "
            f"series has {series.n_channels}"
        )
    return replace(series, values=(series.values - spec.mean) / spec.std)


def invert_scaler(values: np.ndarray, spec: SplitSpec, channel_axis: int = -1) -> np.ndarray:
    """Undo apply_scaler on an array with channels along channel_axis."""
    shape = [1] * values.ndim
    shape[channel_axis] = spec.mean.shape[0]
    if values.shape[channel_axis] != spec.mean.shape[0]:
        raise DataError(
            f"axis {channel_axis} has {values.shape[channel_axis]} channels, "
            f"scaler has {spec.mean.shape[0]}"
        )
    return values * spec.std.reshape(shape) + spec.mean.reshape(shape)


def window_origins(
    series: RawSeries, spec: SplitSpec, partition: str,
    input_len: int, horizon: int,
) -> np.ndarray:
    """First-target-row index of every valid window in a partition.

    A window's input is the input_len rows before its origin (possibly
    reaching into the previous partition), its target the horizon rows
    from the origin on; both must exist and targets must stay inside.
    """
    if partition not in spec.ranges:
        raise DataError(f"unknown partition '{partition}'")
    if input_len < 1 or horizon < 1:
        raise DataError(
            f"input_len and horizon must be positive, got {input_len}, {horizon}"
        )
    start, end = spec.ranges[partition]
    end = min(end, series.n_rows)
    first = max(start, input_len)
    last = end - horizon
    if last < first:
        raise DataError(
            f"partition '{partition}' rows [{start}, {end}) admit no window "
            f"with input_len={input_len} horizon={horizon}"
        )
    return np.arange(first, last + 1)


def iter_windows(
    series: RawSeries, spec: SplitSpec, partition: str,
    input_len: int, horizon: int,
) -> Iterator[TimeSeriesWindow]:
    """Yield every window of a partition in origin order (channel-first)."""
    values_t = series.values.T
    for origin in window_origins(series, spec, partition, input_len, horizon):
        o = int(origin)
        yield TimeSeriesWindow(
            input=values_t[:, o - input_len : o],
            target=values_t[:, o : o + horizon],
            origin=o,
        )
