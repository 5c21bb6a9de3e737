"""Latent-dynamics representations of periodic PDE data with NIF and DeepONet."""

__version__ = "0.1.0"
