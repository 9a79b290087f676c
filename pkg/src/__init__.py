"""KPP front speeds in incompressible flows via interacting particle methods."""

__version__ = "0.1.0"
