"""Core configuration and error types."""
from implied_leverage.core.config import Settings, settings
from implied_leverage.core.errors import (
    LeverageError,
    InputFileError,
    SimulationError
)

__all__ = [
    "Settings",
    "settings",
    "LeverageError",
    "InputFileError",
    "SimulationError"
]
