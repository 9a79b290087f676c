"""Abstract base class for deterministic base flows."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np


class BaseFlow(ABC):
    """Unit-amplitude incompressible velocity field on R^d.

    The composite flow multiplies the whole field by its amplitude δ, so
    implementations return the δ = 1 shape only.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Registry identifier (e.g. ``'cellular2d'``)."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Spatial dimension."""

    @property
    def period(self) -> float | None:
        """Common period in every coordinate, or ``None`` if any period works."""
        return 2.0 * np.pi

    @abstractmethod
    def velocity(self, x: np.ndarray) -> np.ndarray:
        """Velocity at positions *x* of shape (N, d); returns (N, d)."""
