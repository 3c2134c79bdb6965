"""Tri-modal temporal scene graph generation for operating rooms."""

__version__ = "0.1.0"
