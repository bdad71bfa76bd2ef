"""Learn a representation whose similarity graph suits label propagation."""

from graphrep.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
