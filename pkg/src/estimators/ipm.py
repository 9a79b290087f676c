"""Interacting particle estimator."""

from __future__ import annotations

from .. import ipm
from ..flow_model import FlowModel
from ..models import DomainSpec, DualVariable, KppParams
from .base import BaseEstimator


class IpmEstimator(BaseEstimator):
    """μ from the genetic particle algorithm on one flow period (or R^d)."""

    @property
    def name(self) -> str:
        return "ipm"

    def mu(self, flow: FlowModel, dual: DualVariable, p: KppParams) -> float:
        domain = DomainSpec(self.engine.ipm_domain, flow.period)
        trace, _ = ipm.run(flow, dual, p, self.engine.ipm, domain)
        return trace.tail_mean(self.engine.ipm_tail)
