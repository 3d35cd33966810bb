"""Collisional simulation of a boundary-driven XXZ spin chain."""

__version__ = "0.1.0"
