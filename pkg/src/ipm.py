"""Genetic interacting particle method for the principal eigenvalue μ(λe).

Each generation runs H mutation/selection steps:

1. mutation    ξ̃ = ξ + b(ξ)Δt + √(2κΔt) ω        (Euler–Maruyama)
2. restriction ξ̃ ← ξ̃ mod L                      (torus only)
3. fitness     w ∝ exp(c(ξ̃)Δt), E_{j,i} = log mean exp(c(ξ̃)Δt) / Δt
4. selection   multinomial resampling of ξ̃ with weights w

μ_Δt^j is the mean of the H values E_{j,i}. On R^d an optional dynamic
shift recentres the ensemble by +2κλT·e after every generation.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logsumexp
from scipy.stats import linregress

from . import rng
from .errors import BlowUpError, ContractError, DegeneracyError
from .flow_model import FlowModel, drift, fits_torus, potential
from .models import DomainSpec, DualVariable, IpmParams, KppParams, MuTrace, ParticleEnsemble

# Allowed deviation of Σw from 1 at selection.
_WEIGHT_SUM_TOL = 1e-9

GenerationCallback = Callable[[ParticleEnsemble], None]


# ---------------------------------------------------------------------------
# Block helpers
# ---------------------------------------------------------------------------

def _block_slices(n: int) -> list[slice]:
    return [slice(b * rng.BLOCK_SIZE, min(n, (b + 1) * rng.BLOCK_SIZE)) for b in range(rng.n_blocks(n))]


def _for_blocks(pool: ThreadPoolExecutor | None, fn: Callable[[int, slice], np.ndarray], n: int) -> np.ndarray:
    """Apply *fn* to every logical block and concatenate in block order."""
    slices = _block_slices(n)
    if pool is None:
        parts = [fn(b, s) for b, s in enumerate(slices)]
    else:
        parts = list(pool.map(fn, range(len(slices)), slices))
    return np.concatenate(parts, axis=0)


def _positions(ens_or_positions: ParticleEnsemble | np.ndarray) -> np.ndarray:
    if isinstance(ens_or_positions, ParticleEnsemble):
        return ens_or_positions.positions
    return np.asarray(ens_or_positions, dtype=float)


def _wrap(x: np.ndarray, period: np.ndarray) -> np.ndarray:
    wrapped = np.mod(x, period)
    # np.mod can round tiny negatives up to exactly L.
    return np.where(wrapped >= period, 0.0, wrapped)


# ---------------------------------------------------------------------------
# Algorithm steps
# ---------------------------------------------------------------------------

def init_ensemble(domain: DomainSpec, init: str, n: int, seed: int) -> ParticleEnsemble:
    """Draw N i.i.d. particles from m₀ (uniform on the cell or Gaussian at its centre)."""
    if n < 2:
        raise ContractError(f"ensemble needs at least 2 particles, got {n}")
    gen = rng.stream(seed, "init")
    period = np.asarray(domain.period, dtype=float)
    if init == "uniform_on_cell":
        positions = gen.uniform(0.0, 1.0, size=(n, domain.dim)) * period
    elif init == "gaussian":
        positions = 0.5 * period + gen.standard_normal(size=(n, domain.dim))
        if domain.is_torus:
            positions = _wrap(positions, period)
    else:
        raise ContractError(f"unknown initial measure {init!r}")
    return ParticleEnsemble(positions, domain, 0, 0)


def mutation_step(
    ens: ParticleEnsemble,
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    dt: float,
    *,
    seed: int = 0,
    noise: bool = True,
    pool: ThreadPoolExecutor | None = None,
) -> ParticleEnsemble:
    """One Euler–Maruyama step of every particle (pre-selection positions ξ̃).

    Normals for block b come from the (seed, generation, mutation, b) stream.
    """
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    x = ens.positions
    scale = math.sqrt(2.0 * p.kappa * dt)
    j, i = ens.generation, ens.mutation

    def _move(block: int, sl: slice) -> np.ndarray:
        xb = x[sl]
        step = drift(flow, dual, p, xb) * dt
        if noise:
            step = step + scale * rng.normals(seed, "noise", j, i, block, size=xb.shape)
        return xb + step

    moved = _for_blocks(pool, _move, ens.n)
    bad = ~np.all(np.isfinite(moved), axis=1)
    if np.any(bad):
        raise BlowUpError(int(np.argmax(bad)), j, i)
    return ens.with_positions(moved)


def restrict(ens: ParticleEnsemble) -> ParticleEnsemble:
    """Coordinate-wise modulo L on a torus; identity on R^d."""
    if not ens.domain.is_torus:
        return ens
    return ens.with_positions(_wrap(ens.positions, np.asarray(ens.domain.period, dtype=float)))


def normalise_log_fitness(s: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights exp(s)/Σexp(s) and log mean exp(s), stabilised by log-sum-exp."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise DegeneracyError("fitness exponent is non-finite; weights cannot be normalised")
    log_total = logsumexp(s)
    weights = np.exp(s - log_total)
    total = weights.sum()
    if not (total > 0 and math.isfinite(total)):
        raise DegeneracyError("all fitness values underflow; weights cannot be normalised")
    return weights / total, float(log_total - math.log(len(s)))


def fitness_weights(
    ens_pre: ParticleEnsemble | np.ndarray,
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    dt: float,
    *,
    pool: ThreadPoolExecutor | None = None,
) -> tuple[np.ndarray, float]:
    """Selection weights w ∝ exp(cΔt) and the PFGR log(mean exp(cΔt))/Δt."""
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    x = _positions(ens_pre)
    s = _for_blocks(pool, lambda _b, sl: potential(flow, dual, p, x[sl]), len(x)) * dt
    weights, log_mean = normalise_log_fitness(s)
    return weights, log_mean / dt


def resample_multinomial(
    ens_pre: ParticleEnsemble,
    weights: np.ndarray,
    gen: np.random.Generator,
) -> ParticleEnsemble:
    """Draw N offspring i.i.d. from the categorical law over ξ̃ with probabilities w."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (ens_pre.n,):
        raise ContractError(f"expected {ens_pre.n} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
        raise ContractError(f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {w.sum()!r}")
    counts = gen.multinomial(ens_pre.n, w / w.sum())
    parents = np.repeat(np.arange(ens_pre.n), counts)
    return ens_pre.with_positions(ens_pre.positions[parents])


def dynamic_shift(ens: ParticleEnsemble, dual: DualVariable, p: KppParams, T: float) -> ParticleEnsemble:
    """Shift every particle by +2κλT·e (once per generation, R^d only)."""
    if ens.domain.is_torus:
        raise ContractError("dynamic shift applies to unbounded domains only")
    return ens.with_positions(ens.positions + 2.0 * p.kappa * dual.lam * T * dual.vector)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _check_run_inputs(flow: FlowModel, dual: DualVariable, ipm: IpmParams, domain: DomainSpec) -> None:
    if not (flow.dim == dual.dim == domain.dim):
        raise ContractError(
            f"dimension mismatch: flow {flow.dim}D, dual {dual.dim}D, domain {domain.dim}D"
        )
    if ipm.dynamic_shift and domain.is_torus:
        raise ContractError("dynamic_shift requires an unbounded domain")
    if domain.is_torus and not fits_torus(flow, domain.period):
        raise ContractError(
            f"torus period {domain.period} is not a multiple of the flow period {flow.period}"
        )


def run(
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    ipm: IpmParams,
    domain: DomainSpec,
    *,
    on_generation: GenerationCallback | None = None,
) -> tuple[MuTrace, ParticleEnsemble]:
    """Run M generations of H mutation/selection steps.

    *on_generation* receives the ensemble at the end of every generation
    (after the dynamic shift, if any).
    """
    _check_run_inputs(flow, dual, ipm, domain)
    M, H, dt = ipm.n_generations, ipm.n_mutations, ipm.dt
    pfgr = np.empty((M, H))
    mu = np.empty(M)
    ens = init_ensemble(domain, ipm.init, ipm.n_particles, ipm.seed)

    pool = ThreadPoolExecutor(max_workers=ipm.threads) if ipm.threads > 1 else None
    try:
        for j in range(M):
            for i in range(H):
                ens = ParticleEnsemble(ens.positions, domain, j, i)
                ens = restrict(mutation_step(ens, flow, dual, p, dt, seed=ipm.seed, pool=pool))
                weights, pfgr[j, i] = fitness_weights(ens, flow, dual, p, dt, pool=pool)
                ens = resample_multinomial(ens, weights, rng.stream(ipm.seed, "select", j, i))
            mu[j] = pfgr[j].mean()
            if ipm.dynamic_shift:
                ens = dynamic_shift(ens, dual, p, ipm.life_span)
            ens = ParticleEnsemble(ens.positions, domain, j + 1, 0)
            if on_generation is not None:
                on_generation(ens)
            if ipm.log_every and (j + 1) % ipm.log_every == 0:
                print(f"[ipm] generation {j + 1}/{M}: mu={mu[j]:.6f}")
    finally:
        if pool is not None:
            pool.shutdown()

    return MuTrace(pfgr, mu, dt, H), ens


def stationarity_slope(trace: MuTrace, tail_fraction: float = 0.25) -> tuple[float, float]:
    """Linear-fit slope (and stderr) of μ_Δt^j over the trailing generations."""
    mu = trace.per_generation_mu
    n_tail = max(3, int(round(len(mu) * tail_fraction)))
    if len(mu) < 3:
        raise ContractError(f"stationarity test needs >= 3 generations, got {len(mu)}")
    window = mu[-n_tail:]
    fit = linregress(np.arange(len(window), dtype=float), window)
    return float(fit.slope), float(fit.stderr)


def feynman_kac_mu(
    ens: ParticleEnsemble,
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    ipm: IpmParams,
) -> float:
    """μ over one generation from unselected paths: log mean exp(Σ cΔt) / T."""
    domain = ens.domain
    log_weight = np.zeros(ens.n)
    for i in range(ipm.n_mutations):
        ens = ParticleEnsemble(ens.positions, domain, ens.generation, i)
        ens = restrict(mutation_step(ens, flow, dual, p, ipm.dt, seed=ipm.seed))
        log_weight += potential(flow, dual, p, ens.positions) * ipm.dt
    return float((logsumexp(log_weight) - math.log(ens.n)) / ipm.life_span)
