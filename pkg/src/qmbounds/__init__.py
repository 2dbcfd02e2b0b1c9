"""Numerical checks of exponential lower bounds for semiclassical quasimodes."""

__version__ = "0.1.0"
