"""Variational LCHS simulation of non-Hermitian many-body dynamics."""

__version__ = "0.1.0"
