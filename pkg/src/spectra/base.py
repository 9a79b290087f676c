"""Abstract base class for scalar energy spectra E(k)."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np


class SpectralDensity(ABC):
    """Energy density E(k) >= 0 on wavenumbers k >= 0 (cycles per unit length)."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Registry identifier (e.g. ``'k05exp'``)."""

    @abstractmethod
    def eval(self, k: np.ndarray) -> np.ndarray:
        """Return E at every wavenumber in *k* (same shape)."""

    def __call__(self, k: np.ndarray | float) -> np.ndarray:
        return self.eval(np.asarray(k, dtype=float))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"
