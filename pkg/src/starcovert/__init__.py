"""Covert communication through a STAR-RIS: detection and outage analysis, SDR-based beamforming, experiments."""
from .errors import (DegenerateParameterError, DomainError, InconsistentParameterError, InfeasibleInitError,
                     QuadratureError)
from .model import Beamformers, ChannelSet, StarRisState, SystemConfig, generate_channels, parse_quantity
from .optimizer import Layout, Tolerances, algorithm2_alternating

__all__ = [
    "Beamformers", "ChannelSet", "DegenerateParameterError", "DomainError", "InconsistentParameterError",
    "InfeasibleInitError", "Layout", "QuadratureError", "StarRisState", "SystemConfig", "Tolerances",
    "algorithm2_alternating", "generate_channels", "parse_quantity",
]
__version__ = "0.1.0"
