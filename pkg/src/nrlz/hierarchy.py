"""Deterministic noise-averaged dynamics from the Wiener-Hermite representation.

The OU noise is replaced by a bosonic mode; projecting the density-matrix
equation on number states gives a real linear hierarchy in the Bloch-like
variables ``p, q, r, s`` at boson level ``n``::

    p' = -n g p + v(2-d)/2 r
    q' = -n g q - a t r - D (sqrt(n+1) r[n+1] + sqrt(n) r[n-1])
    r' = -n g r + a t q + v d/2 s + v(d-2)/2 p + D (sqrt(n+1) q[n+1] + sqrt(n) q[n-1])
    s' = -n g s + v d/2 r

Level ``n = 0`` is the ensemble-averaged density matrix (p = rho11 - rho22,
s = rho11 + rho22, q + i r = 2 rho12).  Closing the hierarchy at ``n = 0``
with damping ``Gamma = D^2 / gamma`` on ``q, r`` gives the subspace equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import STEP_H, WINDOW_C, default_grid
from .model import NoiseParams, SweepDirection, SystemParams, TimeGrid, eigen_frame

__all__ = [
    "TruncationError",
    "HierarchyState",
    "SubspaceState",
    "hierarchy_rhs",
    "vacuum_state",
    "integrate_hierarchy",
    "solve_hierarchy",
    "evolve_hierarchy",
    "subspace_grid",
    "subspace_tail",
    "evolve_subspace",
    "N_MAX_DEFAULT",
    "N_MAX_CAP",
]

N_MAX_DEFAULT = 12
N_MAX_CAP = 40
TRUNCATION_TOL = 1e-3


class TruncationError(RuntimeError):
    """Hierarchy results did not settle before the level cap."""


@dataclass(frozen=True)
class HierarchyState:
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    s: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.p) - 1

    def as_array(self) -> np.ndarray:
        return np.stack([self.p, self.q, self.r, self.s]).astype(float)

    @classmethod
    def from_array(cls, y: np.ndarray) -> "HierarchyState":
        return cls(y[0].copy(), y[1].copy(), y[2].copy(), y[3].copy())


@dataclass(frozen=True)
class SubspaceState:
    p: float
    q: float
    r: float
    s: float
    Gamma: float


# ---------------------------------------------------------------------------
# density-matrix helpers shared by both pipelines


def _dressed(p: SystemParams, t: float, pop_a: float, pop_b: float) -> tuple[float, float, float, float]:
    """(p, q, r, s) of an incoherent mixture of the instantaneous eigenvectors."""
    ea, eb = eigen_frame(p, t)
    rho11 = pop_a + pop_b * eb * eb
    rho22 = pop_a * ea * ea + pop_b
    rho12 = pop_a * ea + pop_b * eb
    return rho11 - rho22, 2.0 * rho12, 0.0, rho11 + rho22


def _eigen_populations(p: SystemParams, t: float, pv, qv, sv) -> tuple[float, float]:
    ea, eb = eigen_frame(p, t)
    rho11 = 0.5 * (sv + pv)
    rho22 = 0.5 * (sv - pv)
    det2 = (1.0 - ea * eb) ** 2
    pop_a = (rho11 - eb * qv + eb * eb * rho22) / det2
    pop_b = (rho22 - ea * qv + ea * ea * rho11) / det2
    return pop_a, pop_b


def _start_populations(direction: SweepDirection) -> tuple[float, float]:
    return (0.0, 1.0) if direction is SweepDirection.FORWARD else (1.0, 0.0)


def _probability(direction: SweepDirection, pop_a: float, pop_b: float) -> float:
    # forward (s - p) / 2s, backward (s + p) / 2s
    total = pop_a + pop_b
    return (pop_b if direction is SweepDirection.FORWARD else pop_a) / total


# ---------------------------------------------------------------------------
# full hierarchy


@njit(cache=True, nogil=True)
def _hrhs(t, y, alpha, v, delta, D, gamma, out):
    nl = y.shape[1]
    c1 = 0.5 * v * (2.0 - delta)
    c2 = 0.5 * v * delta
    c3 = 0.5 * v * (delta - 2.0)
    x = alpha * t
    for n in range(nl):
        damp = n * gamma
        up_q = math.sqrt(n + 1.0) * y[1, n + 1] if n + 1 < nl else 0.0
        up_r = math.sqrt(n + 1.0) * y[2, n + 1] if n + 1 < nl else 0.0
        dn_q = math.sqrt(n) * y[1, n - 1] if n > 0 else 0.0
        dn_r = math.sqrt(n) * y[2, n - 1] if n > 0 else 0.0
        out[0, n] = -damp * y[0, n] + c1 * y[2, n]
        out[1, n] = -damp * y[1, n] - x * y[2, n] - D * (up_r + dn_r)
        out[2, n] = -damp * y[2, n] + x * y[1, n] + c2 * y[3, n] + c3 * y[0, n] + D * (up_q + dn_q)
        out[3, n] = -damp * y[3, n] + c2 * y[2, n]


@njit(cache=True, nogil=True)
def _hier_integrate(y, alpha, v, delta, D, gamma, t0, dt, n):
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    log_scale = 0.0
    for k in range(n):
        t = t0 + k * dt
        _hrhs(t, y, alpha, v, delta, D, gamma, k1)
        _hrhs(t + 0.5 * dt, y + 0.5 * dt * k1, alpha, v, delta, D, gamma, k2)
        _hrhs(t + 0.5 * dt, y + 0.5 * dt * k2, alpha, v, delta, D, gamma, k3)
        _hrhs(t + dt, y + dt * k3, alpha, v, delta, D, gamma, k4)
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s0 = y[3, 0]
        if not math.isfinite(s0):
            break
        if s0 > 1e6 or 0.0 < s0 < 1e-6:
            y /= s0
            log_scale += math.log(s0)
    return log_scale


def hierarchy_rhs(hs: HierarchyState, t: float, p: SystemParams, noise: NoiseParams, n_max: int | None = None) -> HierarchyState:
    """Time derivative of the truncated hierarchy (levels above ``n_max`` are zero)."""
    y = hs.as_array()
    if n_max is not None:
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        y = y[:, : n_max + 1].copy()
    out = np.empty_like(y)
    _hrhs(float(t), y, p.alpha, p.v, p.delta, noise.D, noise.gamma, out)
    return HierarchyState.from_array(out)


def vacuum_state(p: SystemParams, t: float, n_max: int) -> HierarchyState:
    """Start state: the dressed diabatic state at level 0, empty excited levels."""
    y = np.zeros((4, n_max + 1))
    y[:, 0] = _dressed(p, t, *_start_populations(p.direction))
    return HierarchyState.from_array(y)


def _hierarchy_grid(p: SystemParams, noise: NoiseParams, n_max: int, grid: TimeGrid | None) -> TimeGrid:
    if grid is None:
        grid = default_grid(p, noise)
    # explicit stability of the damped top levels
    dt_max = 0.5 / (n_max * noise.gamma + 2.0 * noise.D * math.sqrt(n_max + 1.0) + 1e-300)
    if grid.dt > dt_max:
        factor = int(math.ceil(grid.dt / dt_max))
        grid = grid.refined(factor)
    return grid


def integrate_hierarchy(p: SystemParams, noise: NoiseParams, grid: TimeGrid, n_max: int, state: HierarchyState | None = None) -> HierarchyState:
    """Propagate ``state`` (default: :func:`vacuum_state`) across ``grid``.

    The result is normalized so that ``s[0] = 1`` when rescaling was needed.
    """
    if state is None:
        state = vacuum_state(p, grid.t_start, n_max)
    y = np.ascontiguousarray(state.as_array())
    _hier_integrate(y, p.alpha, p.v, p.delta, noise.D, noise.gamma, grid.t_start, grid.dt, grid.n_steps)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"hierarchy diverged for {p}, {noise}")
    return HierarchyState.from_array(y)


def solve_hierarchy(p: SystemParams, noise: NoiseParams, grid: TimeGrid | None = None, n_max: int = N_MAX_DEFAULT) -> float:
    """Tunneling probability from the hierarchy truncated at ``n_max``."""
    grid = _hierarchy_grid(p, noise, n_max, grid)
    hs = integrate_hierarchy(p, noise, grid, n_max)
    pops = _eigen_populations(p, grid.t_end, hs.p[0], hs.q[0], hs.s[0])
    return _probability(p.direction, *pops)


def evolve_hierarchy(
    p: SystemParams,
    noise: NoiseParams,
    grid: TimeGrid | None = None,
    n_max: int = N_MAX_DEFAULT,
    escalate: bool = True,
    tol: float = TRUNCATION_TOL,
    cap: int = N_MAX_CAP,
) -> float:
    """Hierarchy probability with a truncation check against ``n_max + 2``.

    With ``escalate`` the level count grows by two until consecutive results
    agree within ``tol``; otherwise (or past ``cap``) a disagreement raises
    :class:`TruncationError`.
    """
    prev = solve_hierarchy(p, noise, grid, n_max)
    while True:
        nxt = solve_hierarchy(p, noise, grid, n_max + 2)
        if abs(nxt - prev) <= tol:
            return nxt
        if not escalate or n_max + 2 >= cap:
            raise TruncationError(
                f"levels {n_max} and {n_max + 2} differ by {abs(nxt - prev):.3g} for {p}, {noise}"
            )
        n_max += 2
        prev = nxt


# ---------------------------------------------------------------------------
# n = 0 subspace


@njit(cache=True, nogil=True)
def _sub_integrate(y, alpha, v, delta, G, t0, dt, n):
    c1 = 0.5 * v * (2.0 - delta)
    c2 = 0.5 * v * delta
    c3 = 0.5 * v * (delta - 2.0)
    p, q, r, s = y[0], y[1], y[2], y[3]
    log_scale = 0.0
    for k in range(n):
        t = t0 + k * dt
        tm = t + 0.5 * dt
        t1 = t + dt
        k1p = c1 * r
        k1q = -alpha * t * r - G * q
        k1r = alpha * t * q + c2 * s + c3 * p - G * r
        k1s = c2 * r
        p2 = p + 0.5 * dt * k1p
        q2 = q + 0.5 * dt * k1q
        r2 = r + 0.5 * dt * k1r
        s2 = s + 0.5 * dt * k1s
        k2p = c1 * r2
        k2q = -alpha * tm * r2 - G * q2
        k2r = alpha * tm * q2 + c2 * s2 + c3 * p2 - G * r2
        k2s = c2 * r2
        p3 = p + 0.5 * dt * k2p
        q3 = q + 0.5 * dt * k2q
        r3 = r + 0.5 * dt * k2r
        s3 = s + 0.5 * dt * k2s
        k3p = c1 * r3
        k3q = -alpha * tm * r3 - G * q3
        k3r = alpha * tm * q3 + c2 * s3 + c3 * p3 - G * r3
        k3s = c2 * r3
        p4 = p + dt * k3p
        q4 = q + dt * k3q
        r4 = r + dt * k3r
        s4 = s + dt * k3s
        k4p = c1 * r4
        k4q = -alpha * t1 * r4 - G * q4
        k4r = alpha * t1 * q4 + c2 * s4 + c3 * p4 - G * r4
        k4s = c2 * r4
        p += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        r += dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        s += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        if s > 1e6 or 0.0 < s < 1e-6:
            p /= s
            q /= s
            r /= s
            log_scale += math.log(s)
            s = 1.0
    y[0], y[1], y[2], y[3] = p, q, r, s
    return log_scale


def subspace_grid(p: SystemParams, Gamma: float, c: float = WINDOW_C, h: float = STEP_H) -> TimeGrid:
    """Noiseless window; the step also resolves the damping rate ``Gamma``."""
    grid = default_grid(p, None, c, h)
    dt_max = h / Gamma if Gamma > 0 else grid.dt
    if grid.dt > dt_max:
        grid = TimeGrid.symmetric(grid.half_width, dt_max)
    return grid


def subspace_tail(p: SystemParams, Gamma: float, T: float, pv: float, sv: float) -> tuple[float, float]:
    """Carry ``(p, s)`` across ``|t| > T``, where ``q, r`` follow their steady state.

    There ``r = Gamma S / (Gamma^2 + alpha^2 t^2)`` with
    ``S = v/2 (delta s + (delta - 2) p)`` and ``S' = v^2 (delta - 1) r``, which
    integrates in closed form.  The white-noise damping leaves a ``1/t`` tail
    in the relaxation of ``p`` that a finite window cannot capture.
    """
    if Gamma == 0.0:
        return pv, sv
    v, delta = p.v, p.delta
    a = abs(p.alpha)
    J = (0.5 * math.pi - math.atan(a * T / Gamma)) / a
    S = 0.5 * v * (delta * sv + (delta - 2.0) * pv)
    k = v * v * (delta - 1.0)
    R = S * J if k == 0.0 else S * math.expm1(k * J) / k
    return pv + 0.5 * v * (2.0 - delta) * R, sv + 0.5 * v * delta * R


def evolve_subspace(p: SystemParams, Gamma: float, grid: TimeGrid | None = None, tails: bool = True) -> float:
    """Tunneling probability from the n = 0 subspace equations with damping ``Gamma``."""
    if Gamma < 0:
        raise ValueError("Gamma must be >= 0")
    if grid is None:
        grid = subspace_grid(p, Gamma)
    pop_a, pop_b = _start_populations(p.direction)
    if tails:
        pv, sv = subspace_tail(p, Gamma, -grid.t_start, pop_a - pop_b, pop_a + pop_b)
        pop_a, pop_b = 0.5 * (sv + pv), 0.5 * (sv - pv)
    y = np.array(_dressed(p, grid.t_start, pop_a, pop_b))
    _sub_integrate(y, p.alpha, p.v, p.delta, float(Gamma), grid.t_start, grid.dt, grid.n_steps)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"subspace equations diverged for {p}, Gamma={Gamma}")
    pop_a, pop_b = _eigen_populations(p, grid.t_end, y[0], y[1], y[3])
    if tails:
        pv, sv = subspace_tail(p, Gamma, grid.t_end, pop_a - pop_b, pop_a + pop_b)
        pop_a, pop_b = 0.5 * (sv + pv), 0.5 * (sv - pv)
    return _probability(p.direction, pop_a, pop_b)
