"""Regionalization of spatial extremes with extremal-t max-stable models."""
__version__ = "0.1.0"

from .model import AnisotropyParams, GlobalParams  # noqa: E402

__all__ = ["AnisotropyParams", "GlobalParams", "__version__"]
