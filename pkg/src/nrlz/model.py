"""Domain types and the effective two-level Hamiltonian.

The system is a Landau-Zener sweep with nonreciprocal coupling,

    H_eff(t) = -1/2 [[alpha t + f,  v          ],
                     [v (1-delta), -alpha t - f]]

acting on the amplitude pair (a, b).  ``f`` is the classical bath noise.
All types here are frozen value objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateStateError",
    "SystemParams",
    "NoiseParams",
    "StateVector",
    "TimeGrid",
    "SweepDirection",
    "effective_hamiltonian",
    "population",
    "tunneling_probability",
    "eigen_frame",
    "eigen_amplitudes",
    "initial_state",
    "RESCALE_LOW",
    "RESCALE_HIGH",
]

# population band outside which amplitudes are renormalized
RESCALE_LOW = 1e-6
RESCALE_HIGH = 1e6


class DegenerateStateError(ValueError):
    """Raised when a probability is requested from a zero-norm state."""


@dataclass(frozen=True)
class SystemParams:
    """Sweep rate ``alpha``, coupling ``v`` and nonreciprocity ``delta``."""

    alpha: float
    v: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"coupling v must be positive, got {self.v}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")

    @property
    def w(self) -> float:
        """Lower off-diagonal coupling ``v (1 - delta)``."""
        return self.v * (1.0 - self.delta)

    @property
    def direction(self) -> "SweepDirection":
        return SweepDirection.from_alpha(self.alpha)

    @property
    def hermitian(self) -> bool:
        return self.delta == 0.0

    def rescaled(self, c: float) -> "SystemParams":
        """Return parameters in units where the coupling is multiplied by ``c``."""
        return SystemParams(alpha=self.alpha * c * c, v=self.v * c, delta=self.delta)


@dataclass(frozen=True)
class NoiseParams:
    """Ornstein-Uhlenbeck amplitude ``D`` and inverse correlation time ``gamma``."""

    amplitude_D: float
    gamma: float

    def __post_init__(self):
        if not self.amplitude_D >= 0:
            raise ValueError(f"noise amplitude must be >= 0, got {self.amplitude_D}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def D(self) -> float:
        return self.amplitude_D

    @property
    def Gamma(self) -> float:
        """Effective decoherence rate D^2 / gamma."""
        return self.amplitude_D**2 / self.gamma

    @property
    def silent(self) -> bool:
        return self.amplitude_D == 0.0

    def D_tilde(self, p: SystemParams) -> float:
        return self.amplitude_D / math.sqrt(abs(p.alpha))

    def gamma_tilde(self, p: SystemParams) -> float:
        return self.gamma / math.sqrt(abs(p.alpha))

    @classmethod
    def from_ratios(cls, p: SystemParams, D_tilde: float, gamma_tilde: float) -> "NoiseParams":
        """Build noise parameters from the reduced ratios D/sqrt|alpha|, gamma/sqrt|alpha|."""
        s = math.sqrt(abs(p.alpha))
        return cls(amplitude_D=D_tilde * s, gamma=gamma_tilde * s)

    @classmethod
    def from_Gamma(cls, Gamma: float, gamma: float) -> "NoiseParams":
        return cls(amplitude_D=math.sqrt(Gamma * gamma), gamma=gamma)

    def rescaled(self, c: float) -> "NoiseParams":
        return NoiseParams(amplitude_D=self.amplitude_D * c, gamma=self.gamma * c)


class SweepDirection(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @classmethod
    def from_alpha(cls, alpha: float) -> "SweepDirection":
        if alpha > 0:
            return cls.FORWARD
        if alpha < 0:
            return cls.BACKWARD
        raise ValueError("alpha = 0 has no sweep direction")

    @property
    def sign(self) -> int:
        return 1 if self is SweepDirection.FORWARD else -1

    def initial_state(self) -> "StateVector":
        """Diabatic starting state: (0, 1) forward, (1, 0) backward."""
        if self is SweepDirection.FORWARD:
            return StateVector(0j, 1 + 0j)
        return StateVector(1 + 0j, 0j)


@dataclass(frozen=True)
class StateVector:
    """Amplitudes ``(a, b)``; the physical state is ``exp(log_scale) * (a, b)``."""

    a: complex
    b: complex
    log_scale: float = 0.0

    def scaled(self, lam: float) -> "StateVector":
        """Multiply the amplitudes by ``lam > 0``, compensating in ``log_scale``."""
        if not lam > 0:
            raise ValueError("scale factor must be positive")
        return StateVector(self.a * lam, self.b * lam, self.log_scale - math.log(lam))

    def renormalized(self) -> "StateVector":
        n = population(self)
        if RESCALE_LOW <= n <= RESCALE_HIGH:
            return self
        return self.scaled(1.0 / math.sqrt(n))

    @property
    def log_population(self) -> float:
        """ln of the physical total population, including the accumulated scale."""
        return math.log(population(self)) + 2.0 * self.log_scale

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=complex)


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_start < 0 < self.t_end:
            raise ValueError("grid must straddle t = 0")
        steps = (self.t_end - self.t_start) / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError(f"span / dt = {steps} is not an integer step count")

    @classmethod
    def symmetric(cls, T: float, dt_max: float) -> "TimeGrid":
        """Grid on [-T, T] with the largest step <= ``dt_max`` dividing the span."""
        n = int(math.ceil(2.0 * T / dt_max))
        return cls(-T, T, 2.0 * T / n)

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def half_width(self) -> float:
        return max(-self.t_start, self.t_end)

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.dt / factor)


def effective_hamiltonian(p: SystemParams, t: float, f: float = 0.0) -> np.ndarray:
    """Instantaneous 2x2 Hamiltonian including the noise shift ``f`` of the bias."""
    x = p.alpha * t + f
    return -0.5 * np.array([[x, p.v], [p.w, -x]], dtype=complex)


def population(s: StateVector) -> float:
    """|a|^2 + |b|^2 at the current rescaling level."""
    return abs(s.a) ** 2 + abs(s.b) ** 2


def tunneling_probability(s: StateVector, direction: SweepDirection) -> float:
    """|b|^2/N for a forward sweep, |a|^2/N for a backward sweep."""
    n = population(s)
    if not (n > 0 and math.isfinite(n)):
        raise DegenerateStateError(f"state has population {n}")
    if direction is SweepDirection.FORWARD:
        return abs(s.b) ** 2 / n
    return abs(s.a) ** 2 / n


def eigen_frame(p: SystemParams, t: float, f: float = 0.0) -> tuple[float, float]:
    """Mixing ratios ``(eps_a, eps_b)`` of the instantaneous eigenvectors.

    The eigenvectors are scaled so that their dominant (diabatic) component is
    one: ``u_a = (1, eps_a)`` and ``u_b = (eps_b, 1)``.  Both ratios vanish as
    ``|alpha t + f| -> inf``.  Requires a real spectrum at ``t``.
    """
    x = p.alpha * t + f
    disc = x * x + p.v * p.w
    if disc <= 0 or x == 0:
        raise ValueError(f"no diabatic eigenframe at t={t} (bias {x}, discriminant {disc})")
    m = x + math.copysign(math.sqrt(disc), x)
    return p.w / m, -p.v / m


def eigen_amplitudes(p: SystemParams, t: float, f: float, s: StateVector) -> StateVector:
    """Expand ``s`` in the instantaneous eigenbasis ``(u_a, u_b)``.

    Far from the crossing this basis differs from the diabatic one only by the
    quasi-static admixture ``~ v / (alpha t)``, which otherwise shows up as a
    slowly decaying oscillation of |a|^2 and |b|^2.
    """
    ea, eb = eigen_frame(p, t, f)
    det = 1.0 - ea * eb
    ca = (s.a - eb * s.b) / det
    cb = (s.b - ea * s.a) / det
    return StateVector(ca, cb, s.log_scale)


def initial_state(p: SystemParams, t: float, f: float = 0.0) -> StateVector:
    """Eigenvector at ``t`` connected to the direction's diabatic start state."""
    ea, eb = eigen_frame(p, t, f)
    if p.direction is SweepDirection.FORWARD:
        return StateVector(complex(eb), 1 + 0j)
    return StateVector(1 + 0j, complex(ea))

