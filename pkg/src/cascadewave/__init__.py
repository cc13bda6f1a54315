"""Traveling-wave signal propagation in bistable enzyme cascades."""
__version__ = "0.1.0"
