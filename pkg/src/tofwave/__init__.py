"""Numerical laboratory for oscillating fronts of the complex Ginzburg-Landau equation."""

__version__ = "0.1.0"
