"""Spectral density presets addressable by name."""

from __future__ import annotations

from .base import SpectralDensity
from .presets import GaussianSpectrum, K05ExpSpectrum, ZeroSpectrum

__all__ = [
    "GaussianSpectrum",
    "K05ExpSpectrum",
    "SpectralDensity",
    "ZeroSpectrum",
    "get_spectrum",
]

# Registry of available spectra – add new presets here.
_SPECTRA: dict[str, type[SpectralDensity]] = {
    "zero": ZeroSpectrum,
    "k05exp": K05ExpSpectrum,
    "gauss": GaussianSpectrum,
}


def get_spectrum(name: str) -> SpectralDensity:
    """Return a spectrum instance by name.

    Raises ``KeyError`` if *name* is not registered.
    Available names: gauss, k05exp, zero
    """
    try:
        cls = _SPECTRA[name]
    except KeyError:
        available = ", ".join(sorted(_SPECTRA))
        raise KeyError(
            f"Unknown spectrum '{name}'. Available: {available}"
        ) from None
    return cls()
