"""Density-matrix simulation of Rydberg blockade two-qubit gates."""

__version__ = "0.1.0"
