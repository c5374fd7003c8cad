import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nrlz.model import (
    DegenerateStateError,
    NoiseParams,
    StateVector,
    SweepDirection,
    SystemParams,
    TimeGrid,
    effective_hamiltonian,
    eigen_amplitudes,
    eigen_frame,
    initial_state,
    population,
    tunneling_probability,
)

finite = st.floats(-50, 50, allow_nan=False)
amps = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


def test_hamiltonian_examples():
    np.testing.assert_allclose(effective_hamiltonian(SystemParams(1, 1, 0), 0, 0), -0.5 * np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(effective_hamiltonian(SystemParams(1, 1, 2), 0, 0), -0.5 * np.array([[0, 1], [-1, 0]]))
    np.testing.assert_allclose(
        effective_hamiltonian(SystemParams(1, 1, 0.5), 2, 0.3), -0.5 * np.array([[2.3, 1], [0.5, -2.3]])
    )


@given(finite, finite, st.floats(0.1, 5))
def test_hamiltonian_hermitian_only_without_nonreciprocity(t, f, v):
    H = effective_hamiltonian(SystemParams(1.3, v, 0.0), t, f)
    np.testing.assert_allclose(H, H.conj().T)
    H2 = effective_hamiltonian(SystemParams(1.3, v, 0.7), t, f)
    assert not np.allclose(H2, H2.conj().T)


def test_population_examples():
    assert population(StateVector(0, 1)) == 1
    assert population(StateVector(3 / 5, 4j / 5)) == pytest.approx(1)
    assert population(StateVector(1, 1)) == 2


def test_tunneling_probability_examples():
    assert tunneling_probability(StateVector(1, 0), SweepDirection.FORWARD) == 0
    assert tunneling_probability(StateVector(1, 0), SweepDirection.BACKWARD) == 1
    assert tunneling_probability(StateVector(1, 1), SweepDirection.FORWARD) == 0.5
    with pytest.raises(DegenerateStateError):
        tunneling_probability(StateVector(0, 0), SweepDirection.FORWARD)


@given(amps, amps, st.floats(1e-3, 1e3))
def test_probability_invariant_under_rescaling(a, b, lam):
    s = StateVector(a, b)
    if population(s) < 1e-6:
        return
    for d in SweepDirection:
        p1 = tunneling_probability(s, d)
        p2 = tunneling_probability(s.scaled(lam), d)
        assert p2 == pytest.approx(p1, rel=1e-12, abs=1e-15)
    # the physical population is unchanged by the bookkeeping
    assert s.scaled(lam).log_population == pytest.approx(s.log_population, abs=1e-9)


def test_renormalized_only_outside_band():
    s = StateVector(1e4, 0)
    r = s.renormalized()
    assert population(r) == pytest.approx(1)
    assert r.log_population == pytest.approx(s.log_population)
    assert StateVector(1, 1).renormalized() == StateVector(1, 1)


def test_direction_from_alpha():
    assert SystemParams(2.0).direction is SweepDirection.FORWARD
    assert SystemParams(-2.0).direction is SweepDirection.BACKWARD
    assert SweepDirection.FORWARD.initial_state().as_array().tolist() == [0, 1]
    assert SweepDirection.BACKWARD.initial_state().as_array().tolist() == [1, 0]
    with pytest.raises(ValueError):
        SweepDirection.from_alpha(0.0)


@pytest.mark.parametrize("kw", [dict(alpha=1, v=0), dict(alpha=1, delta=-0.1), dict(alpha=float("nan"))])
def test_system_params_validation(kw):
    with pytest.raises(ValueError):
        SystemParams(**kw)


def test_noise_params():
    p = SystemParams(4.0)
    n = NoiseParams.from_ratios(p, 0.5, 1.0)
    assert (n.D, n.gamma) == (1.0, 2.0)
    assert n.D_tilde(p) == 0.5 and n.gamma_tilde(p) == 1.0
    assert n.Gamma == 0.5
    assert NoiseParams.from_Gamma(2.5, 10).D == pytest.approx(5.0)
    assert NoiseParams(0, 1).silent
    with pytest.raises(ValueError):
        NoiseParams(-1, 1)
    with pytest.raises(ValueError):
        NoiseParams(1, 0)


def test_time_grid():
    g = TimeGrid.symmetric(10.0, 0.3)
    assert g.n_steps * g.dt == pytest.approx(20.0)
    assert g.dt <= 0.3
    assert len(g.times()) == g.n_steps + 1
    assert g.refined(2).n_steps == 2 * g.n_steps
    with pytest.raises(ValueError):
        TimeGrid(1.0, 2.0, 0.1)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 1.0, 0.3)


@given(st.floats(0.05, 10), st.sampled_from([1, -1]), st.floats(0, 0.99), st.floats(2, 100))
def test_eigen_frame_vectors(a, sign, delta, t):
    p = SystemParams(sign * a, 1.0, delta)
    t = math.copysign(t, 1.0)
    ea, eb = eigen_frame(p, t)
    H = effective_hamiltonian(p, t)
    for u in (np.array([1, ea]), np.array([eb, 1])):
        Hu = H @ u
        lam = Hu[np.argmax(abs(u))] / u[np.argmax(abs(u))]
        np.testing.assert_allclose(Hu, lam * u, atol=1e-12)


def test_eigen_amplitudes_round_trip():
    p = SystemParams(1.0, 1.0, 0.5)
    s0 = initial_state(p, -30.0)
    c = eigen_amplitudes(p, -30.0, 0.0, s0)
    assert abs(c.a) == pytest.approx(0, abs=1e-15)
    assert c.b == pytest.approx(1)
    back = initial_state(SystemParams(-1.0, 1.0, 0.5), -30.0)
    c = eigen_amplitudes(SystemParams(-1.0, 1.0, 0.5), -30.0, 0.0, back)
    assert c.a == pytest.approx(1) and abs(c.b) < 1e-15


def test_rescaled_params():
    p = SystemParams(2.0, 1.0, 0.3).rescaled(2.0)
    assert (p.alpha, p.v, p.delta) == (8.0, 2.0, 0.3)
