"""Trace-driven simulation and analytics for regional cache federations."""

__version__ = "0.1.0"

from .core import (AccessEvent, CacheNodeSpec, EvictionPolicy, FederationConfig,  # noqa: E402
                   PlacementPolicy, SimOutcome, ValidationError, validate_config)
from .engine import simulate  # noqa: E402

__all__ = [
    "AccessEvent", "CacheNodeSpec", "EvictionPolicy", "FederationConfig", "PlacementPolicy",
    "SimOutcome", "ValidationError", "simulate", "validate_config",
]
