"""Built-in base flows: zero, cellular and ABC fields."""

from __future__ import annotations

import numpy as np

from .base import BaseFlow


class ZeroFlow(BaseFlow):
    """v ≡ 0 in any dimension."""

    def __init__(self, dim: int = 2) -> None:
        self._dim = dim

    @property
    def name(self) -> str:
        return "zero"

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def period(self) -> float | None:
        return None

    def velocity(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x, dtype=float)


class ShearZeroBase(ZeroFlow):
    """2D zero base for the random shear flow δ·(0, ξ(x))."""

    def __init__(self) -> None:
        super().__init__(2)

    @property
    def name(self) -> str:
        return "shear2d_zero_base"


class Cellular2D(BaseFlow):
    """(-sin x cos y, cos x sin y)."""

    @property
    def name(self) -> str:
        return "cellular2d"

    @property
    def dim(self) -> int:
        return 2

    def velocity(self, x: np.ndarray) -> np.ndarray:
        sx, cx = np.sin(x[:, 0]), np.cos(x[:, 0])
        sy, cy = np.sin(x[:, 1]), np.cos(x[:, 1])
        return np.column_stack([-sx * cy, cx * sy])


class ABC3D(BaseFlow):
    """Arnold–Beltrami–Childress flow (sin z + cos y, sin x + cos z, sin y + cos x)."""

    @property
    def name(self) -> str:
        return "abc3d"

    @property
    def dim(self) -> int:
        return 3

    def velocity(self, x: np.ndarray) -> np.ndarray:
        px, py, pz = x[:, 0], x[:, 1], x[:, 2]
        return np.column_stack([
            np.sin(pz) + np.cos(py),
            np.sin(px) + np.cos(pz),
            np.sin(py) + np.cos(px),
        ])


class Cellular3D(BaseFlow):
    """(-sin x cos y cos z, -sin y cos x cos z, 2 sin z cos x cos y)."""

    @property
    def name(self) -> str:
        return "cellular3d"

    @property
    def dim(self) -> int:
        return 3

    def velocity(self, x: np.ndarray) -> np.ndarray:
        sx, cx = np.sin(x[:, 0]), np.cos(x[:, 0])
        sy, cy = np.sin(x[:, 1]), np.cos(x[:, 1])
        sz, cz = np.sin(x[:, 2]), np.cos(x[:, 2])
        return np.column_stack([-sx * cy * cz, -sy * cx * cz, 2.0 * sz * cx * cy])
