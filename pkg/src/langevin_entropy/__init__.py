"""Entropy decay of the kinetic Langevin equation: solver, oracles and inequality certificates."""

__version__ = "0.1.0"
