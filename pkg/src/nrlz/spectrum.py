"""Instantaneous eigenvalues and exceptional points along a (noisy) sweep."""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .io import write_csv
from .model import SystemParams, TimeGrid
from .noise import NoisePath

__all__ = [
    "SpectrumSample",
    "EpKind",
    "EpRecord",
    "discriminant",
    "instantaneous_eigenvalues",
    "find_exceptional_points",
    "spectrum_scan",
    "spectrum_arrays",
    "write_spectrum_csv",
    "write_eps_csv",
    "EP_TOL",
]

EP_TOL = 1e-10


@dataclass(frozen=True)
class SpectrumSample:
    t: float
    e_plus: complex
    e_minus: complex
    discriminant: float


class EpKind(enum.Enum):
    NOISELESS_ANALYTIC = "noiseless-analytic"
    NOISE_INDUCED_CROSSING = "noise-induced-crossing"


@dataclass(frozen=True)
class EpRecord:
    t_ep: float
    kind: EpKind


def discriminant(p: SystemParams, t, f=0.0):
    """(alpha t + f)^2 + v^2 (1 - delta); works elementwise on arrays."""
    x = p.alpha * t + f
    return x * x + p.v * p.v * (1.0 - p.delta)


def instantaneous_eigenvalues(p: SystemParams, t: float, f: float = 0.0) -> tuple[complex, complex]:
    """``(+sqrt(disc)/2, -sqrt(disc)/2)``; imaginary pair in the broken phase."""
    half = 0.5 * cmath.sqrt(discriminant(p, t, f))
    return half, -half


def _path_values(path: NoisePath | None, grid: TimeGrid) -> np.ndarray:
    if path is None:
        return np.zeros(grid.n_steps + 1)
    if path.grid != grid:
        raise ValueError("noise path and scan grid differ")
    return path.values


def spectrum_scan(p: SystemParams, path: NoisePath | None, grid: TimeGrid) -> list[SpectrumSample]:
    t, ep, em, disc = spectrum_arrays(p, path, grid)
    return [SpectrumSample(float(a), complex(b), complex(c), float(d)) for a, b, c, d in zip(t, ep, em, disc)]


def spectrum_arrays(p: SystemParams, path: NoisePath | None, grid: TimeGrid):
    """Vectorized form of :func:`spectrum_scan`: ``(t, e_plus, e_minus, disc)``."""
    t = grid.times()
    disc = discriminant(p, t, _path_values(path, grid))
    e_plus = 0.5 * np.sqrt(disc.astype(complex))
    return t, e_plus, -e_plus, disc


def _bisect(p: SystemParams, t0: float, t1: float, f0: float, f1: float) -> float:
    """Root of the discriminant on [t0, t1] with f linear between the endpoints."""

    def g(t):
        u = (t - t0) / (t1 - t0)
        return discriminant(p, t, f0 + u * (f1 - f0))

    lo, hi = t0, t1
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) < EP_TOL or hi - lo < 1e-15 * max(1.0, abs(mid)):
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_exceptional_points(p: SystemParams, path: NoisePath | None, grid: TimeGrid) -> list[EpRecord]:
    """Exceptional points (sign changes of the discriminant) inside the grid.

    Without noise the points are the analytic ``alpha t = +-v sqrt(delta - 1)``.
    With noise the discriminant is scanned on the linearly interpolated path
    and each sign change is refined by bisection.
    """
    if path is None or not np.any(path.values):
        if p.delta <= 1.0:
            return []
        root = p.v * math.sqrt(p.delta - 1.0) / abs(p.alpha)
        return [
            EpRecord(t, EpKind.NOISELESS_ANALYTIC)
            for t in (-root, root)
            if grid.t_start <= t <= grid.t_end
        ]
    t = grid.times()
    f = _path_values(path, grid)
    disc = discriminant(p, t, f)
    pos = disc > 0
    out = []
    for k in np.nonzero(pos[:-1] != pos[1:])[0]:
        t_ep = _bisect(p, t[k], t[k + 1], f[k], f[k + 1])
        out.append(EpRecord(float(t_ep), EpKind.NOISE_INDUCED_CROSSING))
    return out


def write_spectrum_csv(path, p: SystemParams, noise_path: NoisePath | None, grid: TimeGrid) -> None:
    """Columns ``t, re_e_plus, im_e_plus, re_e_minus, im_e_minus``."""
    t, ep, em, _ = spectrum_arrays(p, noise_path, grid)
    write_csv(path, "spectrum", zip(t, ep.real, ep.imag, em.real, em.imag))


def write_eps_csv(path, records: list[EpRecord]) -> None:
    write_csv(path, "eps", ((r.t_ep, r.kind.value) for r in records))
