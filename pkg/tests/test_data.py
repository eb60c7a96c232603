import os

import numpy as np
import pytest
from conftest import (
    brute_window_count,
    dataset_dir,
    has_dataset,
    synthetic_series,
    write_csv,
)

from unettsf.data import (
    RawSeries,
    apply_scaler,
    invert_scaler,
    iter_windows,
    load_csv,
    make_split,
    resolve_dataset,
    select_channel,
    window_origins,
)
from unettsf.errors import DataError
from unettsf.rng import SplitMix64


def series_of(values: np.ndarray, name="synth") -> RawSeries:
    values = np.asarray(values, dtype=np.float64)
    return RawSeries(name, [f"t{i}" for i in range(len(values))],
                     values, [f"v{i}" for i in range(values.shape[1])])


class TestLoadCsv:
    def test_roundtrip(self, tmp_path):
        values = synthetic_series(20, 3)
        path = write_csv(tmp_path / "a.csv", values, columns=["x", "y", "OT"])
        series = load_csv(path)
        assert series.name == "a"
        assert series.columns == ["x", "y", "OT"]
        assert series.values.shape == (20, 3)
        assert len(series.timestamps) == 20
        assert np.allclose(series.values, values, atol=1e-9)

    def test_bad_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "date,a,b\n"
            "2020-01-01,1.0,2.0\n"
            "2020-01-02,3.0,oops\n"
            "2020-01-03,5.0,6.0\n"
        )
        with pytest.raises(DataError, match="'oops' at row 2, column 3"):
            load_csv(str(path))

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("date,a,b\nt0,1.0,2.0\nt1,3.0\n")
        with pytest.raises(DataError, match="row 2 has 2 cells"):
            load_csv(str(path))

    def test_missing_date_header(self, tmp_path):
        path = tmp_path / "nodate.csv"
        path.write_text("time,a\nt0,1.0\n")
        with pytest.raises(DataError, match="first column must be 'date'"):
            load_csv(str(path))

    def test_missing_file(self):
        with pytest.raises(DataError, match="not found"):
            load_csv("/nonexistent/nowhere.csv")

    def test_empty_and_header_only(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(str(empty))
        header_only = tmp_path / "h.csv"
        header_only.write_text("date,a\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(str(header_only))


class TestResolveDataset:
    def test_registry_name(self, tmp_path):
        (tmp_path / "ETTh1.csv").write_text("date,a\nt0,1\n")
        path, protocol, name = resolve_dataset("etth1", str(tmp_path))
        assert path.endswith("ETTh1.csv") and protocol == "ett_hourly"
        assert name == "etth1"
        assert resolve_dataset("ettm2", str(tmp_path))[1] == "ett_minute"
        assert resolve_dataset("weather", str(tmp_path))[1] == "ratio_7_1_2"

    def test_literal_path(self, tmp_path):
        p = tmp_path / "mine.csv"
        p.write_text("date,a\nt0,1\n")
        path, protocol, name = resolve_dataset(str(p), ".")
        assert path == str(p) and protocol == "ratio_7_1_2" and name == "mine"

    def test_unknown(self):
        with pytest.raises(DataError, match="unknown dataset"):
            resolve_dataset("nope", ".")


class TestSplits:
    def test_ratio_100_rows(self):
        split = make_split(series_of(synthetic_series(100, 2)), "ratio_7_1_2")
        assert split.ranges == {"train": (0, 70), "val": (70, 80), "test": (80, 100)}

    def test_ratio_partitions_tile_rows(self):
        for n in (53, 101, 1000, 17420):
            split = make_split(series_of(synthetic_series(n, 1)), "ratio_7_1_2")
            r = split.ranges
            assert r["train"][0] == 0 and r["test"][1] == n
            assert r["train"][1] == r["val"][0] and r["val"][1] == r["test"][0]

    def test_hourly_benchmark_borders(self):
        split = make_split(series_of(synthetic_series(17420, 2)), "ett_hourly")
        assert split.ranges == {
            "train": (0, 8640), "val": (8640, 11520), "test": (11520, 14400),
        }

    def test_minute_benchmark_borders(self):
        split = make_split(series_of(synthetic_series(69680, 1)), "ett_minute")
        assert split.ranges == {
            "train": (0, 34560), "val": (34560, 46080), "test": (46080, 57600),
        }

    def test_hourly_needs_enough_rows(self):
        with pytest.raises(DataError, match="14400"):
            make_split(series_of(synthetic_series(5000, 1)), "ett_hourly")

    def test_unknown_protocol(self):
        with pytest.raises(DataError, match="unknown protocol"):
            make_split(series_of(synthetic_series(50, 1)), "ratio_8_1_1")


class TestScaler:
    def test_stats_from_train_rows_only(self):
        values = synthetic_series(100, 2)
        split = make_split(series_of(values), "ratio_7_1_2")
        assert np.allclose(split.mean, values[:70].mean(axis=0), atol=1e-12)
        assert np.allclose(split.std, values[:70].std(axis=0), atol=1e-12)

        # corrupting val/test rows must not move the statistics
        tampered = values.copy()
        tampered[70:] *= 1000.0
        split2 = make_split(series_of(tampered), "ratio_7_1_2")
        assert np.array_equal(split.mean, split2.mean)
        assert np.array_equal(split.std, split2.std)

    def test_hand_example_mean_5_std_2(self):
        # 14 train rows alternating 3/7: mean 5, std 2; a raw 9 scales to 2.0
        values = np.array([3.0, 7.0] * 7 + [9.0] * 6).reshape(-1, 1)
        split = make_split(series_of(values), "ratio_7_1_2")
        assert split.mean[0] == 5.0 and split.std[0] == 2.0
        scaled = apply_scaler(series_of(values), split)
        assert scaled.values[14, 0] == 2.0

    def test_scaled_train_rows_standardized(self):
        series = series_of(synthetic_series(100, 3))
        split = make_split(series, "ratio_7_1_2")
        scaled = apply_scaler(series, split)
        train = scaled.values[:70]
        assert np.max(np.abs(train.mean(axis=0))) <= 1e-9
        assert np.max(np.abs(train.std(axis=0) - 1.0)) <= 1e-9

    def test_invert_roundtrip(self):
        series = series_of(synthetic_series(80, 2))
        split = make_split(series, "ratio_7_1_2")
        scaled = apply_scaler(series, split)
        back = invert_scaler(scaled.values, split)
        assert np.max(np.abs(back - series.values)) < 1e-12

    def test_invert_channel_axis(self):
        series = series_of(synthetic_series(60, 3))
        split = make_split(series, "ratio_7_1_2")
        windows = np.random.default_rng(0).normal(size=(4, 3, 10))
        back = invert_scaler(windows, split, channel_axis=1)
        want = windows * split.std[None, :, None] + split.mean[None, :, None]
        assert np.array_equal(back, want)

    def test_constant_channel_rejected(self):
        values = synthetic_series(100, 2)
        values[:, 1] = 4.0
        with pytest.raises(DataError, match="v1"):
            make_split(series_of(values), "ratio_7_1_2")

    def test_apply_checks_channels(self):
        split = make_split(series_of(synthetic_series(60, 2)), "ratio_7_1_2")
        with pytest.raises(DataError):
            apply_scaler(series_of(synthetic_series(60, 3)), split)


class TestWindows:
    def test_example_counts_100_rows(self):
        series = series_of(synthetic_series(100, 1))
        split = make_split(series, "ratio_7_1_2")
        assert len(window_origins(series, split, "train", 10, 5)) == 56
        assert len(window_origins(series, split, "val", 10, 5)) == 6
        assert len(window_origins(series, split, "test", 10, 5)) == 16

    def test_benchmark_test_window_count(self):
        series = series_of(synthetic_series(17420, 2))
        split = make_split(series, "ett_hourly")
        assert len(window_origins(series, split, "train", 336, 96)) == 8209
        assert len(window_origins(series, split, "val", 336, 96)) == 2785
        assert len(window_origins(series, split, "test", 336, 96)) == 2785

    def test_counts_match_brute_force(self):
        rng = SplitMix64(21)
        for _ in range(50):
            n = 30 + rng.below(300)
            input_len = 1 + rng.below(40)
            horizon = 1 + rng.below(20)
            series = series_of(synthetic_series(n, 1))
            split = make_split(series, "ratio_7_1_2")
            for part, (start, end) in split.ranges.items():
                want = brute_window_count(start, end, n, input_len, horizon)
                if want == 0:
                    with pytest.raises(DataError, match=part):
                        window_origins(series, split, part, input_len, horizon)
                else:
                    got = window_origins(series, split, part, input_len, horizon)
                    assert len(got) == want

    def test_val_windows_reach_back_into_train(self):
        series = series_of(synthetic_series(100, 1))
        split = make_split(series, "ratio_7_1_2")
        first = next(iter_windows(series, split, "val", 10, 5))
        assert first.origin == 70
        assert np.array_equal(first.input[0], series.values[60:70, 0])
        assert np.array_equal(first.target[0], series.values[70:75, 0])

    def test_window_contents_and_order(self):
        series = series_of(synthetic_series(60, 2))
        split = make_split(series, "ratio_7_1_2")
        origins = window_origins(series, split, "train", 7, 3)
        wins = list(iter_windows(series, split, "train", 7, 3))
        assert [w.origin for w in wins] == origins.tolist()
        for w in wins:
            assert w.input.shape == (2, 7) and w.target.shape == (2, 3)
            assert np.array_equal(w.input, series.values[w.origin - 7 : w.origin].T)
            assert np.array_equal(w.target, series.values[w.origin : w.origin + 3].T)

    def test_targets_stay_inside_partition(self):
        series = series_of(synthetic_series(100, 1))
        split = make_split(series, "ratio_7_1_2")
        for part, (start, end) in split.ranges.items():
            for o in window_origins(series, split, part, 12, 4):
                assert start <= o and o + 4 <= end

    def test_window_too_large_raises(self):
        series = series_of(synthetic_series(100, 1))
        split = make_split(series, "ratio_7_1_2")
        with pytest.raises(DataError, match="val.*input_len=10 horizon=11"):
            window_origins(series, split, "val", 10, 11)
        with pytest.raises(DataError, match="unknown partition"):
            window_origins(series, split, "future", 5, 2)
        with pytest.raises(DataError):
            window_origins(series, split, "train", 0, 2)


class TestSelectChannel:
    def test_last_channel_default(self):
        series = series_of(synthetic_series(30, 3))
        uni = select_channel(series)
        assert uni.values.shape == (30, 1)
        assert uni.columns == ["v2"]
        assert np.array_equal(uni.values[:, 0], series.values[:, 2])

    def test_out_of_range(self):
        with pytest.raises(DataError, match="channel index 5"):
            select_channel(series_of(synthetic_series(10, 2)), 5)


class TestBenchmarkFiles:
    """Shape checks on the real benchmark CSVs, when present."""

    @pytest.mark.skipif(not has_dataset("ETTh1.csv"),
                        reason="ETTh1.csv not under UNETTSF_DATA_DIR")
    def test_etth1_shape(self):
        series = load_csv(os.path.join(dataset_dir(), "ETTh1.csv"))
        assert series.values.shape == (17420, 7)
        assert series.columns[-1] == "OT"

    @pytest.mark.skipif(not has_dataset("ETTm1.csv"),
                        reason="ETTm1.csv not under UNETTSF_DATA_DIR")
    def test_ettm1_shape(self):
        series = load_csv(os.path.join(dataset_dir(), "ETTm1.csv"))
        assert series.values.shape == (69680, 7)
