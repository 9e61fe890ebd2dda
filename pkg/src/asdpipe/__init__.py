"""Modular anomalous sound detection: frontends, kNN backends and DCASE scoring."""
from .exceptions import ASDError, CorruptionError, ValidationError

__version__ = "0.1.0"

__all__ = ["ASDError", "CorruptionError", "ValidationError", "__version__"]
