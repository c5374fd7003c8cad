"""Closed-form tunneling probabilities.

All exponentials are arranged so that only ``exp(-|x|)`` is ever evaluated;
adiabatic scans (``alpha -> 0``) therefore reach their limits without
overflow.
"""

from __future__ import annotations

import enum
import math
import warnings

from .model import SweepDirection, SystemParams

__all__ = [
    "AnalyticKind",
    "exact_noiseless",
    "exact_delta_one",
    "noiseless_final_population",
    "noiseless_final_populations",
    "white_noise_prob",
    "strong_decoherence_delta0",
    "adiabatic_limit",
    "evaluate",
]


class AnalyticKind(enum.Enum):
    """Closed forms and where they hold.

    NOISELESS_EXACT: D = 0, any delta != 1.
    DELTA_ONE_EXACT: D = 0, delta = 1.
    WHITE_NOISE_ORDER2 / WHITE_NOISE_LEADING: gamma >> 1 and Gamma >> 1.
    ADIABATIC_NOISY / ADIABATIC_NOISELESS: |alpha| -> 0, delta != 1.
    STRONG_DECOHERENCE_DELTA0: delta = 0, Gamma -> inf.
    """

    NOISELESS_EXACT = "noiseless"
    DELTA_ONE_EXACT = "delta-one"
    WHITE_NOISE_ORDER2 = "white-order2"
    WHITE_NOISE_LEADING = "white-leading"
    ADIABATIC_NOISY = "adiabatic-noisy"
    ADIABATIC_NOISELESS = "adiabatic-noiseless"
    STRONG_DECOHERENCE_DELTA0 = "strong-decoherence"


def _check_direction(alpha: float, direction: SweepDirection | None) -> SweepDirection:
    derived = SweepDirection.from_alpha(alpha)
    if direction is not None and direction is not derived:
        raise ValueError(f"direction {direction.value} inconsistent with alpha = {alpha}")
    return derived


def exact_noiseless(p: SystemParams, direction: SweepDirection | None = None) -> float:
    """Asymptotic noiseless probability for ``delta != 1``."""
    d = _check_direction(p.alpha, direction)
    if p.delta == 1.0:
        raise ValueError("delta = 1 needs exact_delta_one")
    delta = p.delta
    kappa = math.pi * p.v**2 * (1.0 - delta) / (2.0 * p.alpha)
    if d is SweepDirection.FORWARD:
        # (1-delta) e / (1 - delta e),  e = exp(-kappa)
        if kappa >= 0:
            e = math.exp(-kappa)
            return (1.0 - delta) * e / (1.0 - delta * e)
        return (1.0 - delta) / (math.exp(kappa) - delta)
    # E / (1 - delta + delta E),  E = exp(kappa)
    if kappa <= 0:
        E = math.exp(kappa)
        return E / (1.0 - delta + delta * E)
    return 1.0 / ((1.0 - delta) * math.exp(-kappa) + delta)


def exact_delta_one(alpha: float, v: float = 1.0, direction: SweepDirection | None = None) -> float:
    d = _check_direction(alpha, direction)
    if d is SweepDirection.BACKWARD:
        return 1.0
    return 2.0 * alpha / (2.0 * alpha + math.pi * v * v)


def noiseless_final_populations(p: SystemParams) -> tuple[float, float]:
    """``(|a|^2, |b|^2)`` at ``t -> +inf`` after a noiseless forward sweep from (0, 1).

    ``|b|^2 = exp(-kappa)`` and ``|a|^2 = (1 - exp(-kappa)) / (1 - delta)`` with
    ``kappa = pi v^2 (1 - delta) / (2 alpha)``.
    """
    if p.alpha <= 0:
        raise ValueError("population formula is for forward sweeps")
    if p.delta == 1.0:
        raise ValueError("delta = 1 not covered")
    kappa = math.pi * p.v**2 * (1.0 - p.delta) / (2.0 * p.alpha)
    return -math.expm1(-kappa) / (1.0 - p.delta), math.exp(-kappa)


def noiseless_final_population(p: SystemParams) -> float:
    """Total population ``N = (1 - delta e^-kappa) / (1 - delta)`` after a forward sweep.

    This is the sum of both entries of :func:`noiseless_final_populations`;
    it is 1 for the Hermitian case and reproduces ``P = |b|^2 / N``.
    """
    pa, pb = noiseless_final_populations(p)
    return pa + pb


def _white_terms(x: float, delta: float, forward: bool):
    """Leading term and the Gamma^-2 coefficient's (E - 1)/den^2 factor.

    ``E = exp(x)`` with ``x`` the exponent of the relevant direction.
    """
    if x <= 0:
        E = math.exp(x)
        den = delta * E + delta - 2.0 if forward else 2.0 - delta + delta * E
        num = (delta - 1.0) * (E + 1.0) if forward else E + 1.0
        return num / den, (E - 1.0) / den**2
    # divide numerator and denominator by E
    Ei = math.exp(-x)
    den = delta + (delta - 2.0) * Ei if forward else (2.0 - delta) * Ei + delta
    num = (delta - 1.0) * (1.0 + Ei) if forward else 1.0 + Ei
    return num / den, Ei * (1.0 - Ei) / den**2


def white_noise_prob(
    p: SystemParams,
    Gamma: float,
    direction: SweepDirection | None = None,
    order: str = "order2",
) -> float:
    """White-noise-limit probability, optionally with the 1/Gamma^2 correction.

    ``order`` is ``"leading"`` (Gamma -> inf) or ``"order2"``.
    """
    d = _check_direction(p.alpha, direction)
    if order not in ("leading", "order2"):
        raise ValueError(f"unknown order {order!r}")
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    if Gamma < 1.0:
        warnings.warn(f"Gamma = {Gamma} is outside the Gamma >> 1 regime", RuntimeWarning, stacklevel=2)
    v, delta, alpha = p.v, p.delta, p.alpha
    forward = d is SweepDirection.FORWARD
    if forward and abs(delta - 1.0) < 1e-12:
        # 0/0 at delta = 1; the limit is the delta = 1 noiseless result and the
        # correction vanishes
        return exact_delta_one(alpha, v)
    if forward:
        x = -math.pi * v * v * (1.0 - delta) / alpha
    else:
        x = math.pi * v * v * (1.0 - delta) / alpha
    lead, ratio = _white_terms(x, delta, forward)
    if order == "leading":
        return lead
    K2 = (v * v * (delta - 1.0) / alpha) ** 2
    corr = 2.0 * v * v * (delta - 1.0) ** 2 * ratio * (K2 - 8.0) / ((K2 + 4.0) * (K2 + 16.0))
    return lead - corr / Gamma**2


def strong_decoherence_delta0(alpha: float, v: float = 1.0) -> float:
    """delta = 0, Gamma -> inf: 1/2 (1 + exp(-pi v^2 / |alpha|))."""
    return 0.5 * (1.0 + math.exp(-math.pi * v * v / abs(alpha)))


def adiabatic_limit(delta: float, direction: SweepDirection, noisy: bool) -> float:
    """``|alpha| -> 0`` limit of the tunneling probability."""
    if delta == 1.0:
        raise ValueError("no closed adiabatic limit at delta = 1")
    forward = direction is SweepDirection.FORWARD
    if delta > 1.0:
        return (delta - 1.0) / delta if forward else 1.0 / delta
    if not noisy:
        return 0.0
    return (delta - 1.0) / (delta - 2.0) if forward else 1.0 / (2.0 - delta)


def evaluate(kind: AnalyticKind | str, p: SystemParams, Gamma: float | None = None) -> float:
    """Dispatch a closed form by kind (used by the CLI ``analytic:<kind>`` method)."""
    kind = AnalyticKind(kind)
    if kind is AnalyticKind.NOISELESS_EXACT:
        if p.delta == 1.0:
            return exact_delta_one(p.alpha, p.v)
        return exact_noiseless(p)
    if kind is AnalyticKind.DELTA_ONE_EXACT:
        if p.delta != 1.0:
            raise ValueError("delta-one closed form needs delta = 1")
        return exact_delta_one(p.alpha, p.v)
    if kind in (AnalyticKind.WHITE_NOISE_ORDER2, AnalyticKind.WHITE_NOISE_LEADING):
        if Gamma is None:
            raise ValueError("white-noise closed form needs Gamma")
        order = "order2" if kind is AnalyticKind.WHITE_NOISE_ORDER2 else "leading"
        return white_noise_prob(p, Gamma, order=order)
    if kind is AnalyticKind.STRONG_DECOHERENCE_DELTA0:
        if p.delta != 0.0:
            raise ValueError("strong-decoherence closed form needs delta = 0")
        return strong_decoherence_delta0(p.alpha, p.v)
    noisy = kind is AnalyticKind.ADIABATIC_NOISY
    return adiabatic_limit(p.delta, p.direction, noisy)
