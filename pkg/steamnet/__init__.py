"""Slow-fast modelling and analysis of steam supply networks."""

__version__ = "0.1.0"
