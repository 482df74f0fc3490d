"""Fractal Drum — Laplacian spectra on snowflake domains and filled Julia sets."""

__version__ = "1.0.0"
