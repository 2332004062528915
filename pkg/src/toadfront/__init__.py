"""Simulation and analysis tools for the cane-toads equation with a mortality trade-off."""
from .errors import ConfigError, DomainError, InsufficientDataError, NumericError
from .model import PhiProfile, Regime, TradeoffSpec, classify_regime, eta, eval_m, eval_phi

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InsufficientDataError",
    "NumericError",
    "PhiProfile",
    "Regime",
    "TradeoffSpec",
    "classify_regime",
    "eta",
    "eval_m",
    "eval_phi",
]
