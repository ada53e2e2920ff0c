"""
Error types shared by every service.

Each error carries a stable kebab-case ``code`` so the CLI and the HTTP
service can report failures in a machine-readable way.
"""

from typing import Optional


class LeverageError(ValueError):
    """Base error for invalid inputs and violated preconditions."""
    
    code = "invalid-input"
    
    def __init__(self, message: str, code: Optional[str] = None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.message = message
    
    def __str__(self) -> str:
        return self.message


class InputFileError(LeverageError):
    """Raised when a CSV or config file cannot be read or parsed."""
    
    code = "parse-error"


class SimulationError(LeverageError):
    """Raised when the Monte Carlo generator refuses a configuration or path."""
    
    code = "unstable-kernel"
