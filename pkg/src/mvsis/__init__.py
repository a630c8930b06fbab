"""Simulation and long-time analysis of mean-field SIS epidemic models."""

__version__ = "0.1.0"
