"""Hyperspectral change detection with graph attention and simulated quantum circuits."""

__version__ = "0.1.0"
