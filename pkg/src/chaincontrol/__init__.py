"""Control synthesis for chains of coupled harmonic oscillators."""

__version__ = "0.1.0"
