"""Continual-learning settings as an assumption lattice, with a unified evaluation harness."""

__version__ = "0.1.0"
