"""Unsourced random access over cell-free networks: simulation and experiments."""

__version__ = "0.1.0"
