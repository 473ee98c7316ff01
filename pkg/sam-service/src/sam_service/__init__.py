"""Promptable segmentation served over a small JSON-and-PNG protocol."""

from .app import create_app
from .config import ServiceConfig

__all__ = ["ServiceConfig", "create_app"]
__version__ = "0.1.0"
