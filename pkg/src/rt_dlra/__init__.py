"""Domain-decomposed dynamical low-rank solver for 2x1-dimensional radiative transfer."""
from .kernels import BACKEND
from .problem import ConfigError

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "__version__"]
