"""Fourier-collocation eigensolver estimator."""

from __future__ import annotations

from ..eulerian import spectral_eigen
from ..flow_model import FlowModel
from ..models import DualVariable, KppParams
from .base import BaseEstimator


class SpectralEstimator(BaseEstimator):
    @property
    def name(self) -> str:
        return "spectral"

    def mu(self, flow: FlowModel, dual: DualVariable, p: KppParams) -> float:
        cfg = self.engine
        return spectral_eigen(flow, dual, p, cfg.spectral_n_per_dim, axes=cfg.spectral_axes)
