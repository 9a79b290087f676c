"""Abstract base class for principal-eigenvalue estimators."""

from __future__ import annotations

from abc import ABC, abstractmethod

from ..flow_model import FlowModel
from ..models import DualVariable, EngineConfig, KppParams


class BaseEstimator(ABC):
    """Interface that every μ(λe) estimator must implement."""

    def __init__(self, engine: EngineConfig) -> None:
        self.engine = engine

    @property
    @abstractmethod
    def name(self) -> str:
        """Short identifier for this estimator (e.g. ``'ipm'``)."""

    @abstractmethod
    def mu(self, flow: FlowModel, dual: DualVariable, p: KppParams) -> float:
        """Principal eigenvalue of A^λ for the dual pair (λ, e).

        Parameters
        ----------
        flow:
            Composite velocity field.
        dual:
            λ and the unit vector e.
        p:
            Diffusivity κ and f′(0).
        """
