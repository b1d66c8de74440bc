"""Multimode capacity of Lambda-type ensemble quantum memories."""

__version__ = "0.1.0"
