"""Latent-space tactile servoing."""
__version__ = "0.1.0"
