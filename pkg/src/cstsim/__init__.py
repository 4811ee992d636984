"""Spin-acoustic resonance and coherent spin trapping in spin-3/2 colour centres."""

__version__ = "0.1.0"
