"""Diffusive stochastic Schroedinger equations: integrators, models,
ensemble estimators and deterministic reference curves."""

from __future__ import annotations

__version__ = "0.1.0"

from . import hilbert, models, noise, reference, sde, stats
from .errors import SSEError

__all__ = ["hilbert", "models", "noise", "reference", "sde", "stats", "SSEError", "__version__"]
