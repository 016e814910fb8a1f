"""Lattice spin-squeezing simulator: collective-spin dynamics, correlated
noise, atom loss, and the estimator/magnetometry analysis chain."""

__version__ = "0.1.0"
