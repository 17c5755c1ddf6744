"""Gaussian free field and multiplicative chaos simulation toolkit."""

__version__ = "0.1.0"
