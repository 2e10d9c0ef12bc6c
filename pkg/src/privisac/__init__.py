"""Privacy-preserving precoding and receiver selection for cell-free MIMO ISAC."""

__version__ = "0.1.0"

from .config import ScenarioConfig, profile
from .errors import ConfigurationError, InfeasibleError, MaxIterationsError
from .scenario import ApConfiguration, Scenario, array_response, generate_scenario, path_gain
from .signals import PrecoderMatrix, SymbolFrame, generate_frame

__all__ = [
    "ApConfiguration", "ConfigurationError", "InfeasibleError", "MaxIterationsError",
    "PrecoderMatrix", "Scenario", "ScenarioConfig", "SymbolFrame", "array_response",
    "generate_frame", "generate_scenario", "path_gain", "profile",
]
