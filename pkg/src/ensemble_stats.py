"""Empirical-measure diagnostics of particle ensembles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .errors import ContractError
from .models import DomainSpec, MomentSeries, ParticleEnsemble, SlopeFit

DEFAULT_TAIL_FRACTION = 0.5
MIN_EXPONENT_POINTS = 4


def moments(ens: ParticleEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and unbiased (ddof=1) sample covariance."""
    if ens.n < 2:
        raise ContractError(f"moments need at least 2 particles, got {ens.n}")
    x = ens.positions
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    return mean, cov


def diffusion_exponent(
    series: MomentSeries,
    dim_index: int,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
) -> SlopeFit:
    """OLS slope of log D against log t over the trailing *tail_fraction* of the series."""
    times = series.times
    if not 0 <= dim_index < series.second_moment.shape[1]:
        raise ContractError(f"dim_index {dim_index} out of range")
    if not 0.0 < tail_fraction <= 1.0:
        raise ContractError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    n_tail = max(MIN_EXPONENT_POINTS, int(round(len(times) * tail_fraction)))
    if len(times) < MIN_EXPONENT_POINTS:
        raise ContractError(
            f"exponent fit needs >= {MIN_EXPONENT_POINTS} time points, got {len(times)}"
        )
    t = times[-n_tail:]
    d = series.second_moment[-n_tail:, dim_index]
    if np.any(d <= 0) or np.any(t <= 0):
        raise ContractError("exponent fit needs positive times and second moments")
    fit = linregress(np.log(t), np.log(d))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr))


@dataclass(frozen=True, slots=True, eq=False)
class Histogram:
    edges: np.ndarray          # (n_bins + 1,)
    counts: np.ndarray         # (n_bins,)
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def histogram(
    ens: ParticleEnsemble,
    dim_index: int,
    n_bins: int,
    value_range: tuple[float, float],
) -> Histogram:
    """Uniform-bin counts of one coordinate; mass outside [lo, hi] is counted separately."""
    if n_bins < 1:
        raise ContractError(f"n_bins must be >= 1, got {n_bins}")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not hi > lo:
        raise ContractError(f"histogram range must satisfy lo < hi, got {value_range}")
    x = ens.positions[:, dim_index]
    inside = (x >= lo) & (x <= hi)
    counts, edges = np.histogram(x[inside], bins=n_bins, range=(lo, hi))
    return Histogram(edges, counts, int(np.sum(x < lo)), int(np.sum(x > hi)))


def torus_projection(ens: ParticleEnsemble, period) -> ParticleEnsemble:
    """Coordinate-wise x mod L onto [0, L)^d; *ens* is left untouched."""
    L = np.broadcast_to(np.asarray(period, dtype=float), (ens.dim,))
    wrapped = np.mod(ens.positions, L)
    wrapped = np.where(wrapped >= L, 0.0, wrapped)
    return ParticleEnsemble(
        wrapped, DomainSpec("torus", tuple(float(v) for v in L)), ens.generation, ens.mutation
    )


class MomentRecorder:
    """Generation callback for :func:`ipm.run` that collects a MomentSeries.

    Times are generation end times t_j = j·T.
    """

    def __init__(self, life_span: float) -> None:
        self.life_span = life_span
        self._times: list[float] = []
        self._center: list[np.ndarray] = []
        self._var: list[np.ndarray] = []

    def __call__(self, ens: ParticleEnsemble) -> None:
        mean, cov = moments(ens)
        self._times.append(ens.generation * self.life_span)
        self._center.append(mean)
        self._var.append(np.diag(cov).copy())

    def series(self) -> MomentSeries:
        if not self._times:
            raise ContractError("no generations recorded")
        return MomentSeries(np.array(self._times), np.array(self._center), np.array(self._var))
