"""Ornstein-Uhlenbeck colored noise: sampling, Heun stepping, path statistics.

The process obeys ``df = -gamma f dt + sqrt(2 gamma) D dW`` with stationary law
Normal(0, D^2) and covariance ``D^2 exp(-gamma |t - t'|)``.

Random numbers come from counter-based Philox streams keyed by
``(master_seed, realization_index)``, so realization ``i`` draws the same
numbers no matter which worker runs it or in what order.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .model import NoiseParams, TimeGrid

__all__ = [
    "RngStream",
    "NoisePath",
    "sample_stationary",
    "heun_step",
    "generate_path",
    "generate_paths",
    "autocorrelation_estimate",
    "autocovariance_curve",
    "stationary_ks_distance",
    "HEUN_DT_WARN",
]

# gamma * dt above this degrades the exponential memory
HEUN_DT_WARN = 0.1


@dataclass(frozen=True)
class RngStream:
    """Reproducible generator for one realization of an ensemble."""

    master_seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.index,))
        return np.random.Generator(np.random.Philox(seq))

    @property
    def token(self) -> str:
        return f"{self.master_seed}:{self.index}"


@dataclass(frozen=True)
class NoisePath:
    """One sampled realization ``f(t_k)`` on ``grid`` (``n_steps + 1`` values)."""

    values: np.ndarray
    grid: TimeGrid
    seed: RngStream | None = None
    noise: NoiseParams | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.values) != self.grid.n_steps + 1:
            raise ValueError(
                f"path has {len(self.values)} samples, grid needs {self.grid.n_steps + 1}"
            )

    def __call__(self, t: float) -> float:
        """Linear interpolation of the sampled path."""
        g = self.grid
        u = (t - g.t_start) / g.dt
        k = min(max(int(math.floor(u)), 0), g.n_steps - 1)
        frac = u - k
        return float((1.0 - frac) * self.values[k] + frac * self.values[k + 1])

    def to_csv(self, path) -> None:
        """Write ``t,f`` rows (debug export)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f"])
            for t, f in zip(self.grid.times(), self.values):
                w.writerow([format(t, ".17g"), format(f, ".17g")])


@njit(cache=True, nogil=True)
def _heun(f, dt, gamma, sigma, dw):
    # one Wiener increment shared by predictor and corrector; the SDE has
    # additive noise so the Ito and Stratonovich readings coincide
    pred = f - gamma * f * dt + sigma * dw
    return f + 0.5 * (-gamma * f - gamma * pred) * dt + sigma * dw


@njit(cache=True, nogil=True)
def _fill_path(out, D, gamma, dt, rng):
    sigma = math.sqrt(2.0 * gamma) * D
    sdt = math.sqrt(dt)
    f = D * rng.standard_normal()
    out[0] = f
    for k in range(out.shape[0] - 1):
        f = _heun(f, dt, gamma, sigma, sdt * rng.standard_normal())
        out[k + 1] = f


def _check_dt(noise: NoiseParams, dt: float) -> None:
    if noise.gamma * dt > HEUN_DT_WARN:
        warnings.warn(
            f"gamma*dt = {noise.gamma * dt:.3g} exceeds {HEUN_DT_WARN}; "
            "the sampled correlation will deviate from exp(-gamma tau)",
            RuntimeWarning,
            stacklevel=3,
        )


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def sample_stationary(noise: NoiseParams, rng) -> float:
    """Draw ``f`` from the stationary law Normal(0, D^2); exactly 0 when D = 0."""
    if noise.silent:
        return 0.0
    return noise.D * float(_as_generator(rng).standard_normal())


def heun_step(f, dt: float, noise: NoiseParams, rng=None, *, dw=None):
    """Advance ``f`` by ``dt``.

    ``dw`` is the Wiener increment (variance ``dt``); it is drawn from ``rng``
    when not given.  ``f`` may be an array of independent walkers.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_dt(noise, dt)
    f_arr = np.asarray(f, dtype=float)
    if dw is None:
        if rng is None:
            raise ValueError("need either rng or dw")
        dw = math.sqrt(dt) * _as_generator(rng).standard_normal(f_arr.shape)
    sigma = math.sqrt(2.0 * noise.gamma) * noise.D
    dw = np.asarray(dw, dtype=float)
    pred = f_arr - noise.gamma * f_arr * dt + sigma * dw
    out = f_arr + 0.5 * (-noise.gamma * f_arr - noise.gamma * pred) * dt + sigma * dw
    return float(out) if out.ndim == 0 else out


def generate_path(noise: NoiseParams, grid: TimeGrid, rng) -> NoisePath:
    """Sample a stationary OU path on ``grid``.

    ``rng`` is an :class:`RngStream` (recorded on the path) or a numpy Generator.
    """
    seed = rng if isinstance(rng, RngStream) else None
    values = np.zeros(grid.n_steps + 1)
    if not noise.silent:
        _check_dt(noise, grid.dt)
        _fill_path(values, noise.D, noise.gamma, grid.dt, _as_generator(rng))
    return NoisePath(values, grid, seed, noise)


def generate_paths(noise: NoiseParams, grid: TimeGrid, count: int, master_seed: int) -> list[NoisePath]:
    return [generate_path(noise, grid, RngStream(master_seed, i)) for i in range(count)]


def _lag_steps(grid: TimeGrid, lag: float) -> int:
    k = lag / grid.dt
    kr = int(round(k))
    if abs(k - kr) > 1e-6 * max(1.0, k):
        raise ValueError(f"lag {lag} is not a multiple of dt = {grid.dt}")
    if kr < 0 or kr > grid.n_steps:
        raise ValueError(f"lag {lag} outside the grid span")
    return kr


def autocorrelation_estimate(paths: Sequence[NoisePath], lag: float) -> float:
    """Average of ``f(t) f(t + lag)`` over paths and all admissible origins ``t``.

    The process has known zero mean, so no mean is subtracted and the
    estimator is unbiased.
    """
    if len(paths) < 2:
        raise ValueError("need at least two paths")
    k = _lag_steps(paths[0].grid, lag)
    vals = np.stack([p.values for p in paths])
    n = vals.shape[1]
    return float(np.mean(vals[:, : n - k] * vals[:, k:]))


def autocovariance_curve(paths: Sequence[NoisePath], lags: Iterable[float]) -> np.ndarray:
    return np.array([autocorrelation_estimate(paths, lag) for lag in lags])


def stationary_ks_distance(samples: np.ndarray, D: float) -> float:
    """Kolmogorov-Smirnov distance between ``samples`` and Normal(0, D^2)."""
    from scipy import stats

    return float(stats.kstest(np.asarray(samples) / D, "norm").statistic)
