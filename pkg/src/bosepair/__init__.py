"""Pair-excitation corrections to mean-field Boson dynamics on a periodic grid."""

__version__ = "0.1.0"
