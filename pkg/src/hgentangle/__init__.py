"""Phase-space simulation of entanglement between two Hermite-Gaussian modes of one beam."""

__version__ = "0.1.0"
