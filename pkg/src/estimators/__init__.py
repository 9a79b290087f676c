"""μ(λe) estimators addressable by name."""

from __future__ import annotations

from ..models import EngineConfig
from .base import BaseEstimator
from .ipm import IpmEstimator
from .sl_cn import SlCnEstimator
from .spectral import SpectralEstimator

__all__ = [
    "BaseEstimator",
    "IpmEstimator",
    "SlCnEstimator",
    "SpectralEstimator",
    "get_estimator",
]

# Registry of available estimators – add new methods here.
_ESTIMATORS: dict[str, type[BaseEstimator]] = {
    "ipm": IpmEstimator,
    "sl_cn": SlCnEstimator,
    "spectral": SpectralEstimator,
}


def get_estimator(name: str, engine: EngineConfig | None = None) -> BaseEstimator:
    """Return an estimator instance by name.

    Raises ``KeyError`` if *name* is not registered.
    Available names: ipm, sl_cn, spectral
    """
    try:
        cls = _ESTIMATORS[name]
    except KeyError:
        available = ", ".join(sorted(_ESTIMATORS))
        raise KeyError(
            f"Unknown estimator '{name}'. Available: {available}"
        ) from None
    return cls(engine if engine is not None else EngineConfig())
