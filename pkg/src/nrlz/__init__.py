"""Landau-Zener sweeps of a nonreciprocal two-level system under colored noise."""

from .model import NoiseParams, SweepDirection, SystemParams, TimeGrid

__version__ = "0.1.0"

__all__ = ["NoiseParams", "SweepDirection", "SystemParams", "TimeGrid", "__version__"]
