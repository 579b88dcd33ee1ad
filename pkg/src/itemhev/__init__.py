"""Driving-condition-aware integrated thermal and energy management for a power-split HEV."""

__version__ = "0.1.0"
