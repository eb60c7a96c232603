import numpy as np
import pytest
from conftest import assert_grads_close, numeric_grad

from unettsf.errors import ConfigError
from unettsf.fpn import FpnConfig, build_fpn, build_fpn_backward, level_lengths


def test_benchmark_chains():
    cfg = FpnConfig()
    assert level_lengths(336, cfg) == [336, 167, 83, 41]
    assert level_lengths(96, cfg) == [96, 47, 23, 11]
    assert level_lengths(24, cfg) == [24, 11, 5, 2]


def test_single_stage_is_input_only():
    assert level_lengths(10, FpnConfig(stages=1)) == [10]


def test_lengths_strictly_decrease():
    for length in (17, 101, 720):
        lens = level_lengths(length, FpnConfig())
        assert all(a > b for a, b in zip(lens, lens[1:]))


def test_too_short_names_stage():
    with pytest.raises(ConfigError, match="stage 3"):
        level_lengths(4, FpnConfig(stages=4))


def test_config_validation():
    with pytest.raises(ConfigError):
        FpnConfig(stages=0)
    with pytest.raises(ConfigError):
        FpnConfig(stages=7)
    with pytest.raises(ConfigError):
        FpnConfig(kernel=0)
    with pytest.raises(ConfigError):
        FpnConfig(padding=-1)


def test_first_level_is_input():
    x = np.arange(20.0)
    levels = build_fpn(x, FpnConfig(stages=3))
    assert levels[0] is x
    assert [lvl.shape[-1] for lvl in levels] == level_lengths(20, FpnConfig(stages=3))


def test_ramp_example():
    levels = build_fpn(np.arange(11.0), FpnConfig(stages=2))
    assert np.array_equal(levels[1], [1.0, 3.0, 5.0, 7.0, 9.0])


def test_constant_preserved_at_every_level():
    levels = build_fpn(np.full(40, -2.5), FpnConfig())
    for lvl in levels:
        assert np.array_equal(lvl, np.full(lvl.shape, -2.5))


def test_alternating_attenuates_exactly():
    x = (-1.0) ** np.arange(30)
    levels = build_fpn(x, FpnConfig(stages=2))
    assert np.max(np.abs(levels[1])) == 1.0 / 3.0


def test_amplitude_never_grows():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(4, 90))
    levels = build_fpn(x, FpnConfig())
    amps = [np.max(np.abs(lvl)) for lvl in levels]
    assert all(a >= b - 1e-12 for a, b in zip(amps, amps[1:]))


def test_batched_matches_single():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(3, 25))
    batched = build_fpn(x, FpnConfig(stages=3))
    for i in range(3):
        single = build_fpn(x[i], FpnConfig(stages=3))
        for b, s in zip(batched, single):
            assert np.array_equal(b[i], s)


def test_backward_identity_when_only_first_level_seeded():
    cfg = FpnConfig(stages=3)
    lens = level_lengths(19, cfg)
    grads = [np.zeros(n) for n in lens]
    grads[0] = np.arange(19.0)
    out = build_fpn_backward(grads, cfg)
    assert np.array_equal(out, np.arange(19.0))


def test_backward_matches_fd():
    cfg = FpnConfig(stages=3)
    rng = np.random.default_rng(10)
    x = rng.normal(size=19)
    lens = level_lengths(19, cfg)
    projections = [rng.normal(size=n) for n in lens]

    def loss():
        return float(
            sum(np.sum(p * lvl) for p, lvl in zip(projections, build_fpn(x, cfg)))
        )

    analytic = build_fpn_backward(projections, cfg)
    assert_grads_close(analytic, numeric_grad(loss, x), label="fpn backward")


def test_backward_validates_level_count_and_lengths():
    cfg = FpnConfig(stages=3)
    with pytest.raises(ConfigError):
        build_fpn_backward([np.zeros(19), np.zeros(9)], cfg)
    with pytest.raises(ConfigError, match="level 3"):
        build_fpn_backward([np.zeros(19), np.zeros(9), np.zeros(5)], cfg)
