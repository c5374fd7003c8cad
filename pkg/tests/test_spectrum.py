import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nrlz.io import read_csv
from nrlz.model import NoiseParams, SystemParams, TimeGrid
from nrlz.noise import RngStream, generate_path
from nrlz.spectrum import (
    EP_TOL,
    EpKind,
    discriminant,
    find_exceptional_points,
    instantaneous_eigenvalues,
    spectrum_arrays,
    spectrum_scan,
    write_eps_csv,
    write_spectrum_csv,
)


def test_eigenvalue_examples():
    assert instantaneous_eigenvalues(SystemParams(1.0), 0.0) == (0.5, -0.5)
    ep, em = instantaneous_eigenvalues(SystemParams(1.0, 1.0, 2.0), 0.0)
    assert ep == pytest.approx(0.5j) and em == pytest.approx(-0.5j)
    assert instantaneous_eigenvalues(SystemParams(1.0, 1.0, 2.0), 1.0) == (0, 0)


def test_noiseless_eps():
    grid = TimeGrid.symmetric(10.0, 0.01)
    assert find_exceptional_points(SystemParams(1.0, 1.0, 0.5), None, grid) == []
    eps = find_exceptional_points(SystemParams(1.0, 1.0, 2.0), None, grid)
    assert [r.t_ep for r in eps] == [-1.0, 1.0]
    assert all(r.kind is EpKind.NOISELESS_ANALYTIC for r in eps)
    # v != 1: eigenvalue-consistent location alpha t = v sqrt(delta - 1)
    eps = find_exceptional_points(SystemParams(2.0, 3.0, 5.0), None, grid)
    assert [r.t_ep for r in eps] == pytest.approx([-3.0, 3.0])


@pytest.mark.parametrize("seed", range(5))
def test_noisy_eps_even_and_refined(seed):
    p = SystemParams(1.0, 1.0, 1.2)
    noise = NoiseParams(3.0, 1.0)
    grid = TimeGrid.symmetric(30.0, 0.01)
    path = generate_path(noise, grid, RngStream(seed))
    eps = find_exceptional_points(p, path, grid)
    assert len(eps) >= 2 and len(eps) % 2 == 0
    for r in eps:
        assert r.kind is EpKind.NOISE_INDUCED_CROSSING
        f = np.interp(r.t_ep, grid.times(), path.values)
        assert abs(discriminant(p, r.t_ep, f)) < EP_TOL


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.99), st.floats(0.1, 5.0))
def test_pt_dichotomy_real_below_one(seed, delta, D):
    p = SystemParams(1.0, 1.0, delta)
    grid = TimeGrid.symmetric(10.0, 0.02)
    path = generate_path(NoiseParams(D, 1.0), grid, RngStream(seed))
    t, ep, em, disc = spectrum_arrays(p, path, grid)
    assert np.all(disc >= (1 - delta) - 1e-12)
    assert np.all(ep.imag == 0) and np.all(em.imag == 0)
    assert np.array_equal(ep, -em)
    assert find_exceptional_points(p, path, grid) == []


def test_scan_gaps():
    grid = TimeGrid.symmetric(5.0, 0.01)
    samples = spectrum_scan(SystemParams(1.0), None, grid)
    gaps = [abs(s.e_plus - s.e_minus) for s in samples]
    assert min(gaps) == pytest.approx(1.0, abs=1e-12)
    one = spectrum_scan(SystemParams(1.0, 1.0, 1.0), None, grid)
    mid = min(one, key=lambda s: abs(s.t))
    assert mid.t == pytest.approx(0, abs=1e-12) and abs(mid.e_plus - mid.e_minus) < 1e-10
    for s in spectrum_scan(SystemParams(1.0, 1.0, 2.0), None, grid):
        assert s.e_plus == -s.e_minus


def test_csv_exports(tmp_path):
    grid = TimeGrid.symmetric(3.0, 0.5)
    p = SystemParams(1.0, 1.0, 2.0)
    write_spectrum_csv(tmp_path / "s.csv", p, None, grid)
    kind, rows = read_csv(tmp_path / "s.csv")
    assert kind == "spectrum" and len(rows) == grid.n_steps + 1
    assert list(rows[0]) == ["t", "re_e_plus", "im_e_plus", "re_e_minus", "im_e_minus"]
    write_eps_csv(tmp_path / "e.csv", find_exceptional_points(p, None, grid))
    kind, rows = read_csv(tmp_path / "e.csv")
    assert kind == "eps" and [r["kind"] for r in rows] == ["noiseless-analytic"] * 2
