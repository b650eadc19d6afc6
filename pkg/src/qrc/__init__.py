"""Dissipative quantum reservoir computing: exact and sampled simulation, tasks and readout training."""

__version__ = "0.1.0"
