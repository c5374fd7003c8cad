import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrlz import dynamics
from nrlz.analytic import exact_delta_one, exact_noiseless
from nrlz.dynamics import (
    EnsembleError,
    EnsembleResult,
    IntegrationError,
    clamp_probability,
    convergence_check,
    default_grid,
    ensemble_average,
    evolve_single,
    evolve_trajectory,
    rk4_step,
    run_realization,
    window_half_width,
)
from nrlz.model import NoiseParams, StateVector, SystemParams, TimeGrid, population
from nrlz.noise import RngStream, generate_path


def test_standard_lz():
    assert evolve_single(SystemParams(math.pi / 2)).probability == pytest.approx(math.exp(-1), abs=1e-3)


def test_delta_one_backward_is_exactly_one():
    assert abs(evolve_single(SystemParams(-1.0, 1.0, 1.0)).probability - 1.0) < 1e-10


def test_nonreciprocal_forward_value():
    assert evolve_single(SystemParams(1.0, 1.0, 0.5)).probability == pytest.approx(0.29527, abs=1e-3)


def test_rk4_single_step_conserves_norm():
    p = SystemParams(1.0)
    s = rk4_step(p, StateVector(0j, 1 + 0j), -3.0, 0.01)
    assert abs(population(s) - 1) < 1e-10


def test_rk4_decoupled_limit_is_pure_phase():
    p = SystemParams(1.0, 1e-12, 0.0)
    s = StateVector(0.6 + 0j, 0.8 + 0j)
    for k in range(100):
        s = rk4_step(p, s, -1.0 + 0.02 * k, 0.02)
    assert abs(s.a) == pytest.approx(0.6, abs=1e-9)


def test_delta_one_backward_b_stays_zero_under_noise():
    p = SystemParams(-1.0, 1.0, 1.0)
    noise = NoiseParams(1.0, 2.0)
    grid = default_grid(p, noise)
    path = generate_path(noise, grid, RngStream(3))
    t, st_ = evolve_trajectory(p, path, grid, stride=50)
    assert np.all(st_[:, 1] == 0)
    s = StateVector(1 + 0j, 0j)
    for k in range(20):
        s = rk4_step(p, s, grid.t_start + k * grid.dt, grid.dt, path)
        assert s.b == 0


@pytest.mark.parametrize("alpha", [0.7, -2.0])
def test_norm_conservation_over_window(alpha):
    p = SystemParams(alpha)
    for h, tol in ((0.05, 1e-8), (0.5, 1e-5)):
        t, st_ = evolve_trajectory(p, grid=default_grid(p, h=h), stride=10)
        n = np.abs(st_[:, 0]) ** 2 + np.abs(st_[:, 1]) ** 2
        assert np.max(np.abs(n - n[0])) < tol


@pytest.mark.parametrize("alpha", [0.2, -0.2, 1.0, -5.0])
@pytest.mark.parametrize("delta", [0.0, 0.5, 1.5])
def test_step_halving_and_window_doubling(alpha, delta):
    p = SystemParams(alpha, 1.0, delta)
    grid = default_grid(p)
    base = evolve_single(p, grid=grid).probability
    assert abs(evolve_single(p, grid=grid.refined(2)).probability - base) < 1e-4
    assert abs(evolve_single(p, grid=default_grid(p, c=80)).probability - base) < 1e-3


def test_rk4_is_fourth_order():
    p = SystemParams(1.0, 1.0, 0.5)
    grid = default_grid(p, h=2.0)
    P = [evolve_single(p, grid=grid.refined(k)).probability for k in (1, 2, 4)]
    ratio = (P[0] - P[1]) / (P[1] - P[2])
    assert 12 < ratio < 22


def test_evolve_single_rejects_mismatched_grid():
    p = SystemParams(1.0)
    noise = NoiseParams(1, 1)
    path = generate_path(noise, default_grid(p, noise), RngStream(0))
    with pytest.raises(ValueError):
        evolve_single(p, path, default_grid(p, c=50))


def test_window_policy():
    p = SystemParams(0.25)
    assert window_half_width(p) == 40 * 4
    assert window_half_width(p, NoiseParams(0, 1)) == 40 * 4
    assert window_half_width(p, NoiseParams(0.5, 0.01)) == 40 / 0.01
    g = default_grid(p, NoiseParams(0.5, 5.0))
    assert 5.0 * g.dt <= 0.1 + 1e-12


def test_realization_equals_path_plus_single_sweep():
    p = SystemParams(1.3, 1.0, 0.4)
    noise = NoiseParams(1.0, 2.0)
    grid = default_grid(p, noise)
    for i in range(3):
        stream = RngStream(17, i)
        fused = run_realization(p, noise, grid, stream)
        split = evolve_single(p, generate_path(noise, grid, stream), grid)
        assert fused.probability == split.probability
        assert fused.seed == split.seed == stream.token


def test_silent_ensemble_short_circuit():
    p = SystemParams(1.0, 1.0, 0.5)
    r = ensemble_average(p, NoiseParams(0, 1), M=50)
    assert r.standard_error == 0
    assert r.mean_probability == evolve_single(p).probability


def test_ensemble_is_schedule_independent():
    p = SystemParams(2.0, 1.0, 0.3)
    noise = NoiseParams(1.0, 1.0)
    runs = [ensemble_average(p, noise, M=24, master_seed=5, workers=w) for w in (1, 4, 16)]
    for r in runs[1:]:
        assert r.mean_probability == runs[0].mean_probability
        assert r.standard_error == runs[0].standard_error
        assert np.array_equal(r.probabilities, runs[0].probabilities)


def test_ensemble_env_worker_override(monkeypatch):
    monkeypatch.setenv("NRLZ_WORKERS", "3")
    assert dynamics.worker_count() == 3
    assert dynamics.worker_count(2) == 2


def test_ensemble_failure_is_loud(monkeypatch):
    real = dynamics.run_realization

    def flaky(p, noise, grid, stream):
        if stream.index in (2, 5):
            raise IntegrationError(f"boom {stream.index}")
        return real(p, noise, grid, stream)

    monkeypatch.setattr(dynamics, "run_realization", flaky)
    with pytest.raises(EnsembleError) as exc:
        ensemble_average(SystemParams(4.0), NoiseParams(0.5, 1.0), M=8, workers=2)
    assert [i for i, _ in exc.value.failures] == [2, 5]


def test_ensemble_needs_two_samples():
    with pytest.raises(ValueError):
        ensemble_average(SystemParams(1.0), NoiseParams(1, 1), M=1)


def test_population_weighted_estimate_matches_mean_without_nonreciprocity():
    r = ensemble_average(SystemParams(2.0), NoiseParams(1.0, 1.0), M=20, master_seed=1)
    # equal up to the O((v / alpha T)^2) spread of eigenbasis norms at readout
    assert r.population_weighted_probability == pytest.approx(r.mean_probability, abs=1e-5)


def test_convergence_check():
    det = EnsembleResult(0.3, 0.0, 10, 0)
    assert convergence_check(det, det).converged
    a = EnsembleResult(0.30, 0.01, 10, 0)
    b = EnsembleResult(0.42, 0.01, 20, 0)
    rep = convergence_check(a, b)
    assert not rep.converged and rep.combined_stderr == pytest.approx(math.sqrt(2) * 0.01)
    assert convergence_check(a, EnsembleResult(0.33, 0.01, 20, 0)).converged


def test_convergence_can_flag_tiny_ensembles():
    # with two samples the stderr estimate itself is wild, so the 3-sigma
    # check fires only a few percent of the time; it must fire at all
    p = SystemParams(1.0)
    noise = NoiseParams(2.0, 0.3)
    flagged = 0
    for seed in range(50):
        r2 = ensemble_average(p, noise, M=2, master_seed=seed)
        r4 = ensemble_average(p, noise, M=4, master_seed=seed + 100)
        flagged += not convergence_check(r2, r4).converged
    assert flagged >= 1


def test_clamp_probability():
    assert clamp_probability(1 + 1e-8) == 1.0
    assert clamp_probability(-1e-8) == 0.0
    assert clamp_probability(0.4) == 0.4
    with pytest.raises(IntegrationError):
        clamp_probability(1.01)


def test_noise_enhances_nonadiabatic_tunneling():
    p = SystemParams(1.0)
    r = ensemble_average(p, NoiseParams.from_ratios(p, 1.0, 1.0), M=300, master_seed=3)
    P0 = evolve_single(p).probability
    assert r.mean_probability - P0 > 2 * r.standard_error


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([0.2, 0.5, 1.0, 3.0, 5.0]), st.sampled_from([1, -1]), st.sampled_from([0.0, 0.3, 0.9, 1.0, 1.7, 2.0]))
def test_noiseless_oracle_property(a, sign, delta):
    p = SystemParams(sign * a, 1.0, delta)
    exact = exact_delta_one(p.alpha) if delta == 1.0 else exact_noiseless(p)
    assert abs(evolve_single(p).probability - exact) < 1e-3


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.5, 2.0), st.floats(0.0, 2.0))
def test_unit_rescaling_invariance(a, c, delta):
    p = SystemParams(a, 1.0, delta)
    assert evolve_single(p.rescaled(c)).probability == pytest.approx(evolve_single(p).probability, abs=2e-4)


def test_noisy_rescaling_invariance_pathwise():
    # the scaled path f(t / c) * c on the scaled grid reproduces the sweep exactly
    p = SystemParams(1.2, 1.0, 0.6)
    noise = NoiseParams(0.8, 1.5)
    grid = default_grid(p, noise)
    path = generate_path(noise, grid, RngStream(4))
    c = 2.0
    grid2 = TimeGrid(grid.t_start / c, grid.t_end / c, grid.dt / c)
    from nrlz.noise import NoisePath

    path2 = NoisePath(path.values * c, grid2)
    P1 = evolve_single(p, path, grid).probability
    P2 = evolve_single(p.rescaled(c), path2, grid2).probability
    assert P2 == pytest.approx(P1, abs=1e-9)
