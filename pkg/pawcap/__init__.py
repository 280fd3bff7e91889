"""Markerless stereo motion capture driving an interactive cat avatar."""

__version__ = '0.1.0'
