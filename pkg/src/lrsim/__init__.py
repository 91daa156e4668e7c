"""Unitary decompositions, Lieb-Robinson bounds and gate counts for power-law spin chains."""

__version__ = "0.1.0"
