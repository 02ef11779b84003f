"""Exception types shared across the package."""

from __future__ import annotations


class SgdaError(Exception):
    """Base class for all package errors."""


class ConfigError(SgdaError, ValueError):
    """Invalid configuration. ``path`` is the dotted location of the bad field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DataError(SgdaError, ValueError):
    """Malformed or unusable input data (signals, manifests, datasets)."""


class FaultFrequencyError(SgdaError, ValueError):
    """A fault-frequency computation failed for a specific fault type."""

    def __init__(self, fault, message: str):
        self.fault = fault
        super().__init__(f"[{getattr(fault, 'value', fault)}] {message}")


class TrainingError(SgdaError, RuntimeError):
    """Optimisation diverged or was fed inconsistent data."""
