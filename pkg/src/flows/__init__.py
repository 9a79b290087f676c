"""Deterministic base flows addressable by name."""

from __future__ import annotations

from ..errors import ContractError
from .base import BaseFlow
from .periodic import ABC3D, Cellular2D, Cellular3D, ShearZeroBase, ZeroFlow

__all__ = [
    "ABC3D",
    "BaseFlow",
    "Cellular2D",
    "Cellular3D",
    "ShearZeroBase",
    "ZeroFlow",
    "get_base_flow",
]

# Registry of available base flows – add new flows here.
_FLOWS: dict[str, type[BaseFlow]] = {
    "zero": ZeroFlow,
    "cellular2d": Cellular2D,
    "shear2d_zero_base": ShearZeroBase,
    "abc3d": ABC3D,
    "cellular3d": Cellular3D,
}


def get_base_flow(name: str, dim: int | None = None) -> BaseFlow:
    """Return a base flow instance by name.

    *dim* is required for ``zero`` and, when given, checked for the others.
    Raises ``KeyError`` if *name* is not registered.
    Available names: abc3d, cellular2d, cellular3d, shear2d_zero_base, zero
    """
    try:
        cls = _FLOWS[name]
    except KeyError:
        available = ", ".join(sorted(_FLOWS))
        raise KeyError(
            f"Unknown base flow '{name}'. Available: {available}"
        ) from None
    if cls is ZeroFlow:
        if dim not in (2, 3):
            raise ContractError(f"zero flow needs dim 2 or 3, got {dim}")
        return ZeroFlow(dim)
    flow = cls()
    if dim is not None and dim != flow.dim:
        raise ContractError(f"base flow '{name}' is {flow.dim}D, config asks for dim={dim}")
    return flow
