"""Built-in spectral densities."""

from __future__ import annotations

import numpy as np

from .base import SpectralDensity


class ZeroSpectrum(SpectralDensity):
    """E(k) = 0; yields identically vanishing fields."""

    @property
    def name(self) -> str:
        return "zero"

    def eval(self, k: np.ndarray) -> np.ndarray:
        return np.zeros_like(k, dtype=float)


class K05ExpSpectrum(SpectralDensity):
    """E(k) = |k|^{1/2} e^{-|k|}, the reference spectrum of the random flow runs."""

    @property
    def name(self) -> str:
        return "k05exp"

    def eval(self, k: np.ndarray) -> np.ndarray:
        ak = np.abs(k)
        return np.sqrt(ak) * np.exp(-ak)


class GaussianSpectrum(SpectralDensity):
    """E(k) = e^{-k^2}."""

    @property
    def name(self) -> str:
        return "gauss"

    def eval(self, k: np.ndarray) -> np.ndarray:
        return np.exp(-np.square(k))
