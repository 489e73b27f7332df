"""Simulation and numerics lab for extreme-value behavior of the symmetric
exclusion process on Z started from step profiles."""

__version__ = "0.1.0"
