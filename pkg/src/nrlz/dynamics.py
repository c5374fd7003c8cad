"""RK4 integration of the noisy nonreciprocal sweep and the ensemble engine.

Integration runs on a symmetric window ``[-T, T]``.  The state is prepared in
the instantaneous eigenvector that continues the diabatic start state and is
read out in the instantaneous eigenbasis at ``T`` (see
:func:`nrlz.model.eigen_amplitudes`); both bases tend to the diabatic one as
``|alpha t| -> inf``, so the reported probabilities are the asymptotic ones.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .model import (
    RESCALE_HIGH,
    RESCALE_LOW,
    NoiseParams,
    StateVector,
    SweepDirection,
    SystemParams,
    TimeGrid,
    tunneling_probability,
)
from .noise import NoisePath, RngStream, _check_dt, _heun

__all__ = [
    "IntegrationError",
    "EnsembleError",
    "RealizationResult",
    "EnsembleResult",
    "ConvergenceReport",
    "WINDOW_C",
    "NOISE_WINDOW_FRACTION",
    "STEP_H",
    "NOISE_STEP_H",
    "window_half_width",
    "default_grid",
    "rk4_step",
    "evolve_single",
    "evolve_trajectory",
    "run_realization",
    "ensemble_average",
    "convergence_check",
    "clamp_probability",
    "worker_count",
]

WINDOW_C = 40.0
NOISE_WINDOW_FRACTION = 0.25
STEP_H = 0.5
NOISE_STEP_H = 0.1
WORKERS_ENV = "NRLZ_WORKERS"


class IntegrationError(RuntimeError):
    """Non-finite amplitudes during a sweep."""


class EnsembleError(RuntimeError):
    """One or more realizations of an ensemble failed."""

    def __init__(self, failures):
        self.failures = failures
        head = "; ".join(f"#{i}: {msg}" for i, msg in failures[:5])
        super().__init__(f"{len(failures)} realization(s) failed: {head}")


@dataclass(frozen=True)
class RealizationResult:
    probability: float
    final_population_logscale: float
    seed: str | None = None


@dataclass(frozen=True)
class EnsembleResult:
    mean_probability: float
    standard_error: float
    sample_count: int
    master_seed: int
    probabilities: np.ndarray = field(repr=False, compare=False, default=None)
    log_populations: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def population_weighted_probability(self) -> float:
        """``sum(P_i N_i) / sum(N_i)``: the probability of the averaged density matrix.

        ``mean_probability`` averages the per-realization ratios instead.  The
        two coincide when every realization conserves its norm (delta = 0).
        """
        if self.log_populations is None:
            raise ValueError("ensemble was summarized without populations")
        w = np.exp(self.log_populations - np.max(self.log_populations))
        return math.fsum(w * self.probabilities) / math.fsum(w)


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    difference: float
    combined_stderr: float


# ---------------------------------------------------------------------------
# grid policy


def window_half_width(p: SystemParams, noise: NoiseParams | None = None, c: float = WINDOW_C) -> float:
    """Half width ``T`` of the integration window.

    ``|alpha| T`` must dwarf the coupling and, with noise, the noise amplitude
    and the noise bandwidth ``gamma``.  Beyond both, OU-induced transitions
    fall off like ``v^2 gamma D^2 / E^4`` in the bias ``E``, so those two
    scales get the smaller multiplier ``c * NOISE_WINDOW_FRACTION``.
    """
    a = abs(p.alpha)
    if a == 0:
        raise ValueError("alpha must be nonzero for a sweep")
    T = c * max(1.0 / math.sqrt(a), p.v / a)
    if noise is not None and not noise.silent:
        T = max(T, c / noise.gamma, c * NOISE_WINDOW_FRACTION * max(noise.D, noise.gamma) / a)
    return T


def default_grid(
    p: SystemParams,
    noise: NoiseParams | None = None,
    c: float = WINDOW_C,
    h: float = STEP_H,
    h_noise: float = NOISE_STEP_H,
) -> TimeGrid:
    """Window ``[-T, T]`` and a step resolving coupling, final bias and noise memory."""
    T = window_half_width(p, noise, c)
    a = abs(p.alpha)
    dt = h / max(p.v, a * T, math.sqrt(a))
    if noise is not None and not noise.silent:
        dt = min(dt, h_noise / noise.gamma)
    return TimeGrid.symmetric(T, dt)


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _rk4(a, b, t, dt, alpha, v, w, f0, fm, f1):
    # integrating-factor (Lawson) RK4: the diagonal phase phi(s) = 1/2 int x
    # is applied exactly, with x quadratic through the three nodes, and RK4
    # only sees the off-diagonal coupling in the rotating frame
    #   A' = i/2 v e^{-2 i phi} B,   B' = i/2 w e^{2 i phi} A.
    # Plain RK4 damps the fast phase rotation by ~(x dt)^6 / 144 per step,
    # which drains the norm over long windows.
    x0 = alpha * t + f0
    xm = alpha * (t + 0.5 * dt) + fm
    x1 = alpha * (t + dt) + f1
    pm = cmath.exp(1j * dt * (5.0 * x0 + 8.0 * xm - x1) / 48.0)
    p1 = cmath.exp(1j * dt * (x0 + 4.0 * xm + x1) / 12.0)
    cm = pm * pm
    cmi = cm.conjugate()
    c1 = p1 * p1
    hv = 0.5j * v
    hw = 0.5j * w
    k1a = hv * b
    k1b = hw * a
    k2a = hv * cmi * (b + 0.5 * dt * k1b)
    k2b = hw * cm * (a + 0.5 * dt * k1a)
    k3a = hv * cmi * (b + 0.5 * dt * k2b)
    k3b = hw * cm * (a + 0.5 * dt * k2a)
    k4a = hv * c1.conjugate() * (b + dt * k3b)
    k4b = hw * c1 * (a + dt * k3a)
    a = (a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)) * p1
    b = (b + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)) * p1.conjugate()
    return a, b


@njit(cache=True, nogil=True)
def _renorm(a, b, ls, lo, hi):
    n = a.real * a.real + a.imag * a.imag + b.real * b.real + b.imag * b.imag
    if n < lo or n > hi:
        s = math.sqrt(n)
        return a / s, b / s, ls + 0.5 * math.log(n)
    return a, b, ls


@njit(cache=True, nogil=True)
def _eig_ratios(x, v, w):
    disc = x * x + v * w
    if disc <= 0.0 or x == 0.0:
        return np.nan, np.nan
    m = x + math.copysign(math.sqrt(disc), x)
    return w / m, -v / m


@njit(cache=True, nogil=True)
def _prepare(alpha, v, w, t0, f0):
    ea, eb = _eig_ratios(alpha * t0 + f0, v, w)
    if alpha > 0:
        return complex(eb), 1.0 + 0.0j
    return 1.0 + 0.0j, complex(ea)


@njit(cache=True, nogil=True)
def _readout(a, b, alpha, v, w, t1, f1):
    ea, eb = _eig_ratios(alpha * t1 + f1, v, w)
    det = 1.0 - ea * eb
    return (a - eb * b) / det, (b - ea * a) / det


@njit(cache=True, nogil=True)
def _finite(a, b):
    return math.isfinite(a.real) and math.isfinite(a.imag) and math.isfinite(b.real) and math.isfinite(b.imag)


@njit(cache=True, nogil=True)
def _sweep_path(alpha, v, w, t0, dt, fvals, lo, hi):
    n = fvals.shape[0] - 1
    a, b = _prepare(alpha, v, w, t0, fvals[0])
    ls = 0.0
    for k in range(n):
        t = t0 + k * dt
        f0 = fvals[k]
        f1 = fvals[k + 1]
        a, b = _rk4(a, b, t, dt, alpha, v, w, f0, 0.5 * (f0 + f1), f1)
        if not _finite(a, b):
            return a, b, ls, k
        a, b, ls = _renorm(a, b, ls, lo, hi)
    ca, cb = _readout(a, b, alpha, v, w, t0 + n * dt, fvals[n])
    return ca, cb, ls, -1


@njit(cache=True, nogil=True)
def _sweep_ou(alpha, v, w, D, gamma, t0, dt, n, rng, lo, hi):
    # draws in the same order as noise._fill_path, so a realization matches
    # generate_path + evolve_single bit for bit
    sigma = math.sqrt(2.0 * gamma) * D
    sdt = math.sqrt(dt)
    f = D * rng.standard_normal()
    a, b = _prepare(alpha, v, w, t0, f)
    ls = 0.0
    for k in range(n):
        t = t0 + k * dt
        f1 = _heun(f, dt, gamma, sigma, sdt * rng.standard_normal())
        a, b = _rk4(a, b, t, dt, alpha, v, w, f, 0.5 * (f + f1), f1)
        f = f1
        if not _finite(a, b):
            return a, b, ls, k
        a, b, ls = _renorm(a, b, ls, lo, hi)
    ca, cb = _readout(a, b, alpha, v, w, t0 + n * dt, f)
    return ca, cb, ls, -1


@njit(cache=True, nogil=True)
def _trajectory(alpha, v, w, t0, dt, fvals, stride, lo, hi, out):
    n = fvals.shape[0] - 1
    a, b = _prepare(alpha, v, w, t0, fvals[0])
    ls = 0.0
    j = 0
    out[j, 0] = a
    out[j, 1] = b
    out[j, 2] = ls
    for k in range(n):
        t = t0 + k * dt
        f0 = fvals[k]
        f1 = fvals[k + 1]
        a, b = _rk4(a, b, t, dt, alpha, v, w, f0, 0.5 * (f0 + f1), f1)
        a, b, ls = _renorm(a, b, ls, lo, hi)
        if (k + 1) % stride == 0:
            j += 1
            out[j, 0] = a
            out[j, 1] = b
            out[j, 2] = ls
    return j + 1


# ---------------------------------------------------------------------------
# single sweeps


def rk4_step(p: SystemParams, s: StateVector, t: float, dt: float, f_interp=None) -> StateVector:
    """One integrating-factor RK4 step of the amplitudes, then the rescaling policy.

    ``f_interp`` maps time to the noise value (a :class:`NoisePath` works);
    ``None`` means no noise.
    """
    if f_interp is None:
        f0 = fm = f1 = 0.0
    else:
        f0, fm, f1 = (float(f_interp(t + c * dt)) for c in (0.0, 0.5, 1.0))
    a, b = _rk4(complex(s.a), complex(s.b), float(t), float(dt), p.alpha, p.v, p.w, f0, fm, f1)
    if not _finite(a, b):
        raise IntegrationError(f"non-finite amplitudes at t={t} for {p}")
    a, b, ls = _renorm(a, b, s.log_scale, RESCALE_LOW, RESCALE_HIGH)
    return StateVector(a, b, ls)


def _path_values(path: NoisePath | None, grid: TimeGrid) -> np.ndarray:
    if path is None:
        return np.zeros(grid.n_steps + 1)
    if path.grid != grid:
        raise ValueError("noise path and integration grid differ")
    return np.ascontiguousarray(path.values, dtype=float)


def _result(p: SystemParams, ca, cb, ls, fail, t0, dt, seed=None) -> RealizationResult:
    if fail >= 0:
        raise IntegrationError(f"non-finite amplitudes at t={t0 + (fail + 1) * dt:.6g} for {p}")
    final = StateVector(ca, cb, ls)
    prob = tunneling_probability(final, p.direction)
    return RealizationResult(prob, final.log_population, seed)


def evolve_single(p: SystemParams, path: NoisePath | None = None, grid: TimeGrid | None = None) -> RealizationResult:
    """Integrate one sweep through ``grid`` under ``path`` (``None``: noiseless)."""
    if grid is None:
        grid = path.grid if path is not None else default_grid(p)
    fvals = _path_values(path, grid)
    ca, cb, ls, fail = _sweep_path(p.alpha, p.v, p.w, grid.t_start, grid.dt, fvals, RESCALE_LOW, RESCALE_HIGH)
    seed = path.seed.token if path is not None and path.seed is not None else None
    return _result(p, ca, cb, ls, fail, grid.t_start, grid.dt, seed)


def evolve_trajectory(p: SystemParams, path: NoisePath | None = None, grid: TimeGrid | None = None, stride: int = 1):
    """Diabatic amplitudes along the sweep, every ``stride`` steps.

    Returns ``(t, states)`` with ``states[:, 0:2]`` the amplitudes and
    ``states[:, 2]`` the accumulated log scale.
    """
    if grid is None:
        grid = path.grid if path is not None else default_grid(p)
    fvals = _path_values(path, grid)
    out = np.empty((grid.n_steps // stride + 1, 3), dtype=complex)
    m = _trajectory(p.alpha, p.v, p.w, grid.t_start, grid.dt, fvals, stride, RESCALE_LOW, RESCALE_HIGH, out)
    t = grid.t_start + grid.dt * stride * np.arange(m)
    return t, out[:m]


def run_realization(p: SystemParams, noise: NoiseParams, grid: TimeGrid, stream: RngStream) -> RealizationResult:
    """One noisy sweep with the noise generated on the fly from ``stream``."""
    ca, cb, ls, fail = _sweep_ou(
        p.alpha, p.v, p.w, noise.D, noise.gamma, grid.t_start, grid.dt, grid.n_steps,
        stream.generator(), RESCALE_LOW, RESCALE_HIGH,
    )
    return _result(p, ca, cb, ls, fail, grid.t_start, grid.dt, stream.token)


# ---------------------------------------------------------------------------
# ensembles


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, 0)) or (os.cpu_count() or 1)
    return max(1, int(workers))


def _run_chunk(p, noise, grid, master_seed, indices, out, logn, failures):
    for i in indices:
        try:
            r = run_realization(p, noise, grid, RngStream(master_seed, i))
            out[i], logn[i] = r.probability, r.final_population_logscale
        except (IntegrationError, ValueError) as exc:
            out[i] = logn[i] = np.nan
            failures.append((i, str(exc)))


def ensemble_average(
    p: SystemParams,
    noise: NoiseParams,
    grid: TimeGrid | None = None,
    M: int = 2000,
    master_seed: int = 0,
    workers: int | None = None,
) -> EnsembleResult:
    """Mean tunneling probability over ``M`` independent noise realizations.

    Realization ``i`` always uses ``RngStream(master_seed, i)`` and the
    reduction is exactly rounded, so the result does not depend on the
    number of workers.
    """
    if M < 2:
        raise ValueError("need M >= 2 realizations")
    if grid is None:
        grid = default_grid(p, noise)
    if noise.silent:
        r = evolve_single(p, None, grid)
        probs = np.full(M, r.probability)
        logn = np.full(M, r.final_population_logscale)
        return EnsembleResult(r.probability, 0.0, M, master_seed, probs, logn)
    _check_dt(noise, grid.dt)

    probs = np.empty(M)
    logn = np.empty(M)
    failures: list = []
    n = worker_count(workers)
    chunks = [range(k, M, n) for k in range(n)]
    if n == 1:
        _run_chunk(p, noise, grid, master_seed, chunks[0], probs, logn, failures)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            futs = [pool.submit(_run_chunk, p, noise, grid, master_seed, c, probs, logn, failures) for c in chunks]
            for fut in futs:
                fut.result()
    if failures:
        raise EnsembleError(sorted(failures))
    return _summarize(probs, master_seed, logn)


def _summarize(probs: np.ndarray, master_seed: int, logn: np.ndarray | None = None) -> EnsembleResult:
    M = len(probs)
    mean = math.fsum(probs) / M
    var = math.fsum((probs - mean) ** 2) / (M - 1)
    return EnsembleResult(mean, math.sqrt(var / M), M, master_seed, probs, logn)


def convergence_check(result_M: EnsembleResult, result_2M: EnsembleResult) -> ConvergenceReport:
    """Flag disagreement beyond three combined standard errors."""
    diff = abs(result_M.mean_probability - result_2M.mean_probability)
    se = math.hypot(result_M.standard_error, result_2M.standard_error)
    if se == 0.0:
        return ConvergenceReport(diff <= 1e-12, diff, se)
    return ConvergenceReport(diff <= 3.0 * se, diff, se)


def clamp_probability(prob: float, tol: float = 1e-6) -> float:
    """Clamp small overshoots of [0, 1]; larger ones indicate a broken run."""
    if -tol <= prob < 0.0:
        return 0.0
    if 1.0 < prob <= 1.0 + tol:
        return 1.0
    if not 0.0 <= prob <= 1.0:
        raise IntegrationError(f"probability {prob} outside [0, 1]")
    return prob
