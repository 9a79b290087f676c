"""Composite incompressible flows and the drift / potential of A^λ.

    v(x)  = δ · (base(x) + ε · ξ(x₁) · ê_component)
    b(x)  = -2κλe + v(x)
    c(x)  = κλ² - λ v(x)·e + f′(0)

ξ depends on the first coordinate only and enters a different component, so
every composite is divergence-free without projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .flows import BaseFlow, get_base_flow
from .models import DualVariable, KppParams
from .random_field import FieldRealization, eval_scalar

# Relative tolerance for deciding that 1/Δk is a multiple of the base period.
_PERIOD_RTOL = 1e-9


@dataclass(frozen=True, slots=True)
class FlowModel:
    """Deterministic base flow plus an optional scaled random perturbation."""

    base: BaseFlow
    delta: float = 1.0                            # δ (velocity units)
    epsilon: float = 0.0                          # ε
    perturbation: FieldRealization | None = None  # scalar ξ(x₁)
    component: int = 1                            # velocity component receiving ε·ξ

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta) or self.delta < 0:
            raise ContractError(f"delta must be finite and >= 0, got {self.delta}")
        if not math.isfinite(self.epsilon):
            raise ContractError(f"epsilon must be finite, got {self.epsilon}")
        if not 0 <= self.component < self.base.dim:
            raise ContractError(
                f"perturbation component {self.component} out of range for {self.base.dim}D flow"
            )
        if self.component == 0 and self.perturbation is not None:
            raise ContractError("ξ(x₁) on the first component would break incompressibility")

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def has_perturbation(self) -> bool:
        return self.perturbation is not None and self.epsilon != 0.0

    @property
    def period(self) -> tuple[float, ...]:
        """Per-dimension period of the composite field."""
        base_period = self.base.period
        if not self.has_perturbation:
            return (base_period if base_period is not None else 2.0 * math.pi,) * self.dim
        field_period = self.perturbation.period
        if base_period is not None:
            ratio = field_period / base_period
            if round(ratio) < 1 or abs(ratio - round(ratio)) > _PERIOD_RTOL * ratio:
                raise ContractError(
                    f"field period {field_period:.12g} is not a multiple of the base period "
                    f"{base_period:.12g}; the composite flow has no common period"
                )
        return (field_period,) * self.dim

    def with_delta(self, delta: float) -> FlowModel:
        return FlowModel(self.base, delta, self.epsilon, self.perturbation, self.component)


def build_flow(
    base: str,
    *,
    dim: int | None = None,
    delta: float = 1.0,
    epsilon: float = 0.0,
    perturbation: FieldRealization | None = None,
    component: int = 1,
) -> FlowModel:
    """Resolve *base* through the flows registry and assemble a FlowModel."""
    return FlowModel(get_base_flow(base, dim), delta, epsilon, perturbation, component)


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != dim:
        raise ContractError(f"positions must have {dim} coordinates, got shape {pts.shape}")
    return pts, single


def velocity(flow: FlowModel, x) -> np.ndarray:
    """v(x) for one point (d,) or many points (N, d)."""
    pts, single = _as_points(x, flow.dim)
    v = flow.base.velocity(pts)
    if flow.has_perturbation:
        v = v.copy()
        v[:, flow.component] += flow.epsilon * eval_scalar(flow.perturbation, pts[:, 0])
    v = flow.delta * v
    return v[0] if single else v


def drift(flow: FlowModel, dual: DualVariable, p: KppParams, x) -> np.ndarray:
    """b(x) = -2κλe + v(x)."""
    _check_dims(flow, dual)
    return velocity(flow, x) - 2.0 * p.kappa * dual.lam * dual.vector


def potential(flow: FlowModel, dual: DualVariable, p: KppParams, x) -> np.ndarray:
    """c(x) = κλ² - λ v(x)·e + f′(0)."""
    _check_dims(flow, dual)
    v = velocity(flow, x)
    return p.kappa * dual.lam**2 - dual.lam * (v @ dual.vector) + p.f_prime0


def divergence(flow: FlowModel, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference ∇·v at one or many points."""
    pts, single = _as_points(x, flow.dim)
    div = np.zeros(pts.shape[0])
    for axis in range(flow.dim):
        step = np.zeros(flow.dim)
        step[axis] = h
        forward = velocity(flow, pts + step)[:, axis]
        backward = velocity(flow, pts - step)[:, axis]
        div += (forward - backward) / (2.0 * h)
    return div[0] if single else div


def _check_dims(flow: FlowModel, dual: DualVariable) -> None:
    if dual.dim != flow.dim:
        raise ContractError(f"dual vector is {dual.dim}D but the flow is {flow.dim}D")


def fits_torus(flow: FlowModel, period: tuple[float, ...]) -> bool:
    """True when every torus side is a whole multiple of the flow period."""
    if flow.base.period is None and not flow.has_perturbation:
        return True
    for side, own in zip(period, flow.period):
        ratio = side / own
        if round(ratio) < 1 or abs(ratio - round(ratio)) > _PERIOD_RTOL * ratio:
            return False
    return True
