import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrlz.model import NoiseParams, TimeGrid
from nrlz.noise import (
    NoisePath,
    RngStream,
    autocorrelation_estimate,
    generate_path,
    generate_paths,
    heun_step,
    sample_stationary,
    stationary_ks_distance,
)


def test_sample_stationary_silent_is_zero():
    assert sample_stationary(NoiseParams(0, 1), RngStream(1)) == 0.0


def test_sample_stationary_moments():
    rng = np.random.default_rng(3)
    x = np.array([sample_stationary(NoiseParams(1, 1), rng) for _ in range(100_000)])
    assert abs(x.mean()) < 0.01
    z = np.array([sample_stationary(NoiseParams(2, 1), rng) for _ in range(100_000)])
    assert abs(z.var() - 4) < 0.06


def test_heun_deterministic_value():
    assert heun_step(1.0, 0.1, NoiseParams(0, 1), dw=0.0) == pytest.approx(0.905, abs=1e-15)


def test_heun_fixed_point():
    assert heun_step(0.0, 0.05, NoiseParams(3.0, 2.0), dw=0.0) == 0.0


def test_heun_needs_increment_source():
    with pytest.raises(ValueError):
        heun_step(0.0, 0.1, NoiseParams(1, 1))


def test_heun_dt_warning():
    with pytest.warns(RuntimeWarning):
        heun_step(0.0, 0.5, NoiseParams(1, 1), dw=0.0)


def test_long_run_variance_from_zero():
    noise = NoiseParams(1.0, 2.0)
    rng = np.random.default_rng(11)
    f = np.zeros(4000)
    for _ in range(300):  # 300 * 0.02 = 6 = 12 correlation times
        f = heun_step(f, 0.02, noise, rng)
    assert abs(f.var() - 1.0) < 0.07
    assert stationary_ks_distance(f, 1.0) < 0.03


def test_long_run_from_far_start_relaxes_to_stationary_law():
    noise = NoiseParams(0.7, 1.0)
    rng = np.random.default_rng(5)
    f = np.full(2000, 5.0)
    for _ in range(1000):
        f = heun_step(f, 0.02, noise, rng)
    assert stationary_ks_distance(f, 0.7) < 0.04


def test_path_matches_heun_chain():
    noise = NoiseParams(1.3, 0.8)
    grid = TimeGrid.symmetric(5.0, 0.05)
    path = generate_path(noise, grid, RngStream(9, 4))
    g = RngStream(9, 4).generator()
    f = noise.D * g.standard_normal()
    assert path.values[0] == f
    for k in range(1, 50):
        f = heun_step(f, grid.dt, noise, dw=math.sqrt(grid.dt) * g.standard_normal())
        assert path.values[k] == pytest.approx(f, abs=1e-13)


def test_path_silent_and_deterministic():
    grid = TimeGrid.symmetric(2.0, 0.01)
    assert not np.any(generate_path(NoiseParams(0, 1), grid, RngStream(1)).values)
    a = generate_path(NoiseParams(1, 1), grid, RngStream(42, 7))
    b = generate_path(NoiseParams(1, 1), grid, RngStream(42, 7))
    assert np.array_equal(a.values, b.values)
    c = generate_path(NoiseParams(1, 1), grid, RngStream(42, 8))
    assert not np.array_equal(a.values, c.values)


def test_path_interpolation_and_length_check(tmp_path):
    grid = TimeGrid(-1.0, 1.0, 0.5)
    path = NoisePath(np.array([0.0, 1.0, 2.0, 3.0, 4.0]), grid)
    assert path(-0.75) == pytest.approx(0.5)
    assert path(1.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        NoisePath(np.zeros(3), grid)
    path.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,f"


def test_autocorrelation_statistics():
    grid = TimeGrid.symmetric(10.0, 0.01)
    paths = generate_paths(NoiseParams(1.0, 1.0), grid, 400, master_seed=2)
    assert autocorrelation_estimate(paths, 0.0) == pytest.approx(1.0, abs=0.05)
    assert autocorrelation_estimate(paths, 1.0) == pytest.approx(math.exp(-1), abs=0.05)
    silent = generate_paths(NoiseParams(0.0, 1.0), grid, 3, master_seed=2)
    assert autocorrelation_estimate(silent, 0.5) == 0.0
    with pytest.raises(ValueError):
        autocorrelation_estimate(paths[:1], 0.0)
    with pytest.raises(ValueError):
        autocorrelation_estimate(paths, 0.005)


def test_exponential_memory_slope():
    grid = TimeGrid.symmetric(10.0, 0.02)
    paths = generate_paths(NoiseParams(1.0, 1.5), grid, 400, master_seed=8)
    lags = np.arange(0, 51) * 0.02
    c = np.array([autocorrelation_estimate(paths, lag) for lag in lags])
    slope = np.polyfit(lags, np.log(c), 1)[0]
    assert slope == pytest.approx(-1.5, rel=0.1)


def test_stationary_mean_zero_over_window():
    grid = TimeGrid.symmetric(5.0, 0.02)
    vals = np.stack([p.values for p in generate_paths(NoiseParams(2.0, 1.0), grid, 300, master_seed=4)])
    window_means = vals[:, 100:200].mean(axis=1)
    assert abs(window_means.mean()) < 3 * window_means.std() / math.sqrt(len(window_means)) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 10**6))
def test_streams_reproducible(seed, index):
    a = RngStream(seed, index).generator().standard_normal(4)
    b = RngStream(seed, index).generator().standard_normal(4)
    assert np.array_equal(a, b)


def test_generate_path_warns_for_coarse_grid():
    grid = TimeGrid.symmetric(2.0, 0.5)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        generate_path(NoiseParams(1.0, 1.0), grid, RngStream(0))
    assert any(issubclass(w.category, RuntimeWarning) for w in rec)
