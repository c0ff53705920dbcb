"""Simulation and verification toolkit for nonlinear state observers."""

__version__ = "0.1.0"
