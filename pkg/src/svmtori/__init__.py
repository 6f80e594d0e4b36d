"""Steady-vortex-metric tori: construction, Robin functions, embeddings, and
narrow-escape Monte Carlo on flat and conformally flat tori."""

__version__ = "0.1.0"
