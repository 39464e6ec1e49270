"""Numerics for the double-elliptic integrable many-body system."""
from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
