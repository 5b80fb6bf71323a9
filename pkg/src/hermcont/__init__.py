"""Numerical continuity-equation laboratory for Hopf and Inoue surfaces."""

__version__ = "0.1.0"
