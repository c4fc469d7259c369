"""Driven-dissipative dynamics and entanglement in subwavelength multilevel atomic arrays."""
__version__ = "0.1.0"
