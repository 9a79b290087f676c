"""Semi-Lagrangian + Crank–Nicolson estimator (2D only)."""

from __future__ import annotations

from ..eulerian import make_grid, run_mu_sl
from ..flow_model import FlowModel
from ..models import DualVariable, KppParams
from .base import BaseEstimator


class SlCnEstimator(BaseEstimator):
    @property
    def name(self) -> str:
        return "sl_cn"

    def mu(self, flow: FlowModel, dual: DualVariable, p: KppParams) -> float:
        cfg = self.engine
        grid = make_grid(cfg.sl_n_per_dim, flow.period[0])
        return run_mu_sl(grid, flow, dual, p, cfg.sl_dt, cfg.sl_n_steps, cfg.sl_burn_in).mu
