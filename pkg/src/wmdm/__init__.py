"""Weak metric doubling measure deformations of finite metric measure spaces."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
