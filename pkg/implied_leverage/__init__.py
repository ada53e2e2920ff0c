"""Implied leverage: smile dynamics from the historical leverage effect."""

__version__ = "1.0.0"
