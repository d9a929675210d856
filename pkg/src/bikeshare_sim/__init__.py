"""Discrete-event simulator for station-based bike sharing systems."""

__version__ = "0.1.0"
