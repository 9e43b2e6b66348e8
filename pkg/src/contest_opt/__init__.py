"""Optimal screening contests: solvers, verification and simulation."""

__version__ = "0.1.0"
