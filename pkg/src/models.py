"""Value types shared across the solver modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import ContractError

TWO_PI = 2.0 * math.pi
SL_MIN_WINDOW_STEPS = 10        # post-burn-in steps an SL+CN μ average needs


def _frozen_array(values, *, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class Estimate(NamedTuple):
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float


class SlopeFit(NamedTuple):
    """Least-squares line through (log x, log y)."""

    slope: float
    intercept: float
    stderr: float


@dataclass(frozen=True, slots=True)
class KppParams:
    """Diffusivity and reaction linearisation of the KPP equation."""

    kappa: float = 1.0        # κ > 0 (length²/time)
    f_prime0: float = 1.0     # f′(0) for f(u) = u(1-u)

    def __post_init__(self) -> None:
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ContractError(f"kappa must be positive and finite, got {self.kappa}")
        if not math.isfinite(self.f_prime0):
            raise ContractError(f"f_prime0 must be finite, got {self.f_prime0}")


@dataclass(frozen=True, slots=True)
class DualVariable:
    """Dual pair (λ, e) parameterising the operator A^λ.

    Use :meth:`from_direction` to build one from an unnormalised vector.
    """

    lam: float                  # λ (inverse length)
    e: tuple[float, ...]        # unit vector in R^d

    def __post_init__(self) -> None:
        if not math.isfinite(self.lam):
            raise ContractError(f"lambda must be finite, got {self.lam}")
        norm = math.sqrt(sum(v * v for v in self.e))
        if abs(norm - 1.0) >= 1e-12:
            raise ContractError(f"e must be a unit vector, |e| = {norm!r}")

    @classmethod
    def from_direction(cls, lam: float, direction) -> DualVariable:
        vec = np.asarray(direction, dtype=float)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0 or not math.isfinite(norm):
            raise ContractError(f"direction must be non-zero and finite, got {direction!r}")
        unit = vec / norm
        # One more pass pins |e| to 1 within an ulp or two.
        unit = unit / math.sqrt(float(np.dot(unit, unit)))
        return cls(float(lam), tuple(float(v) for v in unit))

    @property
    def dim(self) -> int:
        return len(self.e)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.e, dtype=float)


@dataclass(frozen=True, slots=True)
class DomainSpec:
    """Particle domain: a periodic torus or the whole space R^d.

    ``period`` is the torus side length per dimension; on unbounded domains it
    names the reference cell used for initialisation and visualisation.
    """

    kind: str                           # "torus" | "unbounded"
    period: tuple[float, ...]           # L per dimension

    def __post_init__(self) -> None:
        if self.kind not in ("torus", "unbounded"):
            raise ContractError(f"domain kind must be 'torus' or 'unbounded', got {self.kind!r}")
        if not self.period or any(not (p > 0 and math.isfinite(p)) for p in self.period):
            raise ContractError(f"domain period must be positive, got {self.period!r}")

    @property
    def dim(self) -> int:
        return len(self.period)

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"


@dataclass(frozen=True, slots=True)
class IpmParams:
    """Inputs of the genetic particle algorithm."""

    n_particles: int = 10_000         # N
    n_generations: int = 64           # M
    n_mutations: int = 16             # H
    dt: float = 2.0**-8               # Δt
    seed: int = 0
    dynamic_shift: bool = False       # unbounded domains only
    init: str = "uniform_on_cell"     # or "gaussian"
    threads: int = 1                  # speed only, never results
    log_every: int = 0                # progress line every k generations (0 = silent)

    def __post_init__(self) -> None:
        if self.n_particles < 2:
            raise ContractError(f"n_particles must be >= 2, got {self.n_particles}")
        if self.n_generations < 1:
            raise ContractError(f"n_generations must be >= 1, got {self.n_generations}")
        if self.n_mutations < 1 or not (self.dt > 0 and math.isfinite(self.dt)):
            raise ContractError(
                f"generation life span H*dt must be positive, got H={self.n_mutations}, dt={self.dt}"
            )
        if self.seed < 0:
            raise ContractError(f"seed must be non-negative, got {self.seed}")
        if self.init not in ("uniform_on_cell", "gaussian"):
            raise ContractError(f"init must be 'uniform_on_cell' or 'gaussian', got {self.init!r}")
        if self.threads < 1:
            raise ContractError(f"threads must be >= 1, got {self.threads}")

    @property
    def life_span(self) -> float:
        """Generation life span T = H·Δt."""
        return self.n_mutations * self.dt


@dataclass(frozen=True, slots=True, eq=False)
class ParticleEnsemble:
    """N particle positions with their generation / mutation counters."""

    positions: np.ndarray     # (N, d), read-only
    domain: DomainSpec
    generation: int = 0       # j
    mutation: int = 0         # i

    def __post_init__(self) -> None:
        pos = _frozen_array(self.positions)
        if pos.ndim != 2 or pos.shape[1] != self.domain.dim:
            raise ContractError(
                f"positions must have shape (N, {self.domain.dim}), got {pos.shape}"
            )
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def with_positions(self, positions: np.ndarray, **counters: int) -> ParticleEnsemble:
        return ParticleEnsemble(
            positions,
            self.domain,
            counters.get("generation", self.generation),
            counters.get("mutation", self.mutation),
        )


@dataclass(frozen=True, slots=True, eq=False)
class MuTrace:
    """Per-mutation PFGR values and their per-generation means."""

    per_mutation_pfgr: np.ndarray    # (M, H), E_{j,i}
    per_generation_mu: np.ndarray    # (M,), μ_Δt^j
    dt: float = 0.0
    n_mutations: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_mutation_pfgr", _frozen_array(self.per_mutation_pfgr))
        object.__setattr__(self, "per_generation_mu", _frozen_array(self.per_generation_mu))

    @property
    def mu(self) -> float:
        """Headline estimate μ_Δt^M from the final generation."""
        return float(self.per_generation_mu[-1])

    def tail_mean(self, n_last: int) -> float:
        return float(np.mean(self.per_generation_mu[-n_last:]))


@dataclass(frozen=True, slots=True, eq=False)
class MomentSeries:
    """Centre and variance per dimension at generation end times."""

    times: np.ndarray            # (T,)
    center: np.ndarray           # (T, d)
    second_moment: np.ndarray    # (T, d), variance (length²)

    def __post_init__(self) -> None:
        times = _frozen_array(self.times)
        center = _frozen_array(self.center)
        second = _frozen_array(self.second_moment)
        if not (len(times) == len(center) == len(second)):
            raise ContractError("times, center and second_moment must have equal length")
        if second.size and np.any(second < 0):
            raise ContractError("second moments must be non-negative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "second_moment", second)


@dataclass(frozen=True, slots=True)
class EngineConfig:
    """Resolution and parallelism settings shared by the μ estimators."""

    ipm: IpmParams = IpmParams()
    ipm_domain: str = "torus"         # "torus" (one flow period) | "unbounded"
    ipm_tail: int = 1                 # μ averaged over the last k generations
    sl_n_per_dim: int = 128
    sl_dt: float = 2.0**-8
    sl_n_steps: int = 4096
    sl_burn_in: float = 0.5
    spectral_n_per_dim: int = 32
    spectral_axes: tuple[int, ...] | None = None
    threads: int = 1                  # concurrent (λ, e) samples

    def __post_init__(self) -> None:
        if self.ipm_domain not in ("torus", "unbounded"):
            raise ContractError(f"ipm_domain must be 'torus' or 'unbounded', got {self.ipm_domain!r}")
        if not 1 <= self.ipm_tail <= self.ipm.n_generations:
            raise ContractError(
                f"ipm_tail must lie in [1, {self.ipm.n_generations}], got {self.ipm_tail}"
            )
        if self.sl_n_per_dim < 4 or self.spectral_n_per_dim < 4:
            raise ContractError("grid sizes must be >= 4 per dimension")
        if not (self.sl_dt > 0 and self.sl_n_steps > 0):
            raise ContractError(f"SL+CN needs dt > 0 and n_steps > 0, got {self.sl_dt}, {self.sl_n_steps}")
        if not 0.0 <= self.sl_burn_in < 1.0:
            raise ContractError(f"sl_burn_in must lie in [0, 1), got {self.sl_burn_in}")
        window = self.sl_n_steps - math.floor(self.sl_n_steps * self.sl_burn_in)
        if window < SL_MIN_WINDOW_STEPS:
            raise ContractError(
                f"SL+CN averaging window has {window} steps after burn-in; need >= {SL_MIN_WINDOW_STEPS}"
            )
        if self.threads < 1:
            raise ContractError(f"threads must be >= 1, got {self.threads}")

    def with_seed(self, seed: int) -> EngineConfig:
        return replace(self, ipm=replace(self.ipm, seed=seed))
