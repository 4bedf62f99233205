"""Random walks on hyperbolic groups: escape rates, entropies, harmonic-measure dimensions."""

__version__ = "0.1.0"
