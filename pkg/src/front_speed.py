"""KPP front speed c*(z) = inf over (z, λe) > 0 of μ(λe) / (z, λe).

λ is searched on a grid (refined once around the running minimiser) and e
over a small set of directions: z itself, a cone around z, or a global grid
of the admissible half-space. δ sweeps reuse one field realization per seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import linregress

from . import rng
from .errors import ContractError, EstimatorError
from .estimators import get_estimator
from .flow_model import FlowModel
from .models import DualVariable, EngineConfig, KppParams, SlopeFit
from .random_field import sample_realization

# ---------------------------------------------------------------------------
# Configuration constants
# ---------------------------------------------------------------------------
LAMBDA_MIN = 0.125
LAMBDA_MAX = 8.0
LAMBDA_COUNT = 16
REFINE_POINTS = 7            # log-spaced points spanning the minimiser's two neighbours
DEFAULT_CONE_DEG = 15.0
DEFAULT_CONE_SAMPLES = 8

# (z, e) at or below this is treated as inadmissible.
_ADMISSIBLE_EPS = 1e-12


def default_lambda_grid() -> tuple[float, ...]:
    return tuple(float(v) for v in np.geomspace(LAMBDA_MIN, LAMBDA_MAX, LAMBDA_COUNT))


# ---------------------------------------------------------------------------
# Direction search
# ---------------------------------------------------------------------------

def _orthonormal_complement(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to the 3D unit vector *z* and to each other."""
    helper = np.eye(3)[int(np.argmin(np.abs(z)))]
    u = np.cross(z, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(z, u)


@dataclass(frozen=True, slots=True)
class ESearch:
    """How candidate unit vectors e are chosen around z."""

    kind: str = "fixed_to_z"          # fixed_to_z | local_cone | global_grid
    half_angle_deg: float = DEFAULT_CONE_DEG
    n_samples: int = DEFAULT_CONE_SAMPLES

    def __post_init__(self) -> None:
        if self.kind not in ("fixed_to_z", "local_cone", "global_grid"):
            raise ContractError(f"unknown e_search kind {self.kind!r}")
        if self.kind != "fixed_to_z" and self.n_samples < 1:
            raise ContractError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.kind == "local_cone" and not 0.0 < self.half_angle_deg < 90.0:
            raise ContractError(f"cone half-angle must lie in (0, 90) degrees, got {self.half_angle_deg}")

    def directions(self, z: np.ndarray) -> list[np.ndarray]:
        """Candidate e vectors; z is always the first entry except for global grids."""
        d = len(z)
        if self.kind == "fixed_to_z":
            return [z]
        if self.kind == "local_cone":
            half = math.radians(self.half_angle_deg)
            if d == 2:
                angles = np.linspace(-half, half, self.n_samples)
                out = [z]
                for a in angles:
                    if a == 0.0:
                        continue
                    c, s = math.cos(a), math.sin(a)
                    out.append(np.array([c * z[0] - s * z[1], s * z[0] + c * z[1]]))
                return out
            u, w = _orthonormal_complement(z)
            out = [z]
            for t in range(self.n_samples):
                phi = 2.0 * math.pi * t / self.n_samples
                out.append(math.cos(half) * z + math.sin(half) * (math.cos(phi) * u + math.sin(phi) * w))
            return out
        # global_grid
        if d == 2:
            angles = 2.0 * math.pi * np.arange(self.n_samples) / self.n_samples
            candidates = [np.array([math.cos(a), math.sin(a)]) for a in angles]
        else:
            golden = math.pi * (3.0 - math.sqrt(5.0))
            candidates = []
            for t in range(self.n_samples):
                height = 1.0 - 2.0 * (t + 0.5) / self.n_samples
                radius = math.sqrt(max(0.0, 1.0 - height * height))
                candidates.append(np.array([radius * math.cos(golden * t), radius * math.sin(golden * t), height]))
        return [e for e in candidates if float(e @ z) > _ADMISSIBLE_EPS]


# Bases whose unperturbed velocity is identically zero: e = z is already optimal.
_FLAT_BASES = frozenset({"zero", "shear2d_zero_base"})


def default_e_search(
    flow: FlowModel,
    half_angle_deg: float = DEFAULT_CONE_DEG,
    n_samples: int = DEFAULT_CONE_SAMPLES,
) -> ESearch:
    """e = z for randomly perturbed or velocity-free flows, a cone around z for cellular ones."""
    if flow.has_perturbation or flow.base.name in _FLAT_BASES:
        return ESearch("fixed_to_z", half_angle_deg, n_samples)
    return ESearch("local_cone", half_angle_deg, n_samples)


# ---------------------------------------------------------------------------
# Query / result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class FrontSpeedQuery:
    """Propagation direction plus the (λ, e) search and μ estimator."""

    z: tuple[float, ...]
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    e_search: ESearch = ESearch()
    estimator: str = "ipm"
    refine: bool = True               # one 3× finer pass around the best λ

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(v * v for v in self.z))
        if abs(norm - 1.0) >= 1e-12:
            raise ContractError(f"z must be a unit vector, |z| = {norm!r}")
        if not self.lambda_grid:
            raise ContractError("lambda grid is empty")
        if any(not (lam > 0 and math.isfinite(lam)) for lam in self.lambda_grid):
            raise ContractError(f"lambda grid values must be positive, got {self.lambda_grid}")

    @property
    def z_vector(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)


class FrontSpeedSample(NamedTuple):
    lam: float
    e: tuple[float, ...]
    mu: float
    ratio: float


@dataclass(frozen=True, slots=True)
class FrontSpeedResult:
    """Minimising ratio over the sample table."""

    c_star: float                     # length/time
    lambda_opt: float
    e_opt: tuple[float, ...]
    mu_at_opt: float
    samples: tuple[FrontSpeedSample, ...]


# ---------------------------------------------------------------------------
# Minimisation
# ---------------------------------------------------------------------------

def _evaluate(
    pairs: list[tuple[float, np.ndarray]],
    z: np.ndarray,
    flow: FlowModel,
    p: KppParams,
    engine: EngineConfig,
    estimator_name: str,
) -> list[FrontSpeedSample]:
    estimator = get_estimator(estimator_name, engine)

    def _one(pair: tuple[float, np.ndarray]) -> FrontSpeedSample:
        lam, e = pair
        dual = DualVariable.from_direction(lam, e)
        try:
            mu = estimator.mu(flow, dual, p)
        except ContractError:
            raise
        except Exception as exc:
            raise EstimatorError(dual.lam, dual.e, exc) from exc
        return FrontSpeedSample(dual.lam, dual.e, mu, mu / (dual.lam * float(dual.vector @ z)))

    if engine.threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=engine.threads) as pool:
            return list(pool.map(_one, pairs))
    return [_one(pair) for pair in pairs]


def _best(samples: list[FrontSpeedSample]) -> FrontSpeedSample:
    return min(samples, key=lambda s: (s.ratio, s.lam))


def _refinement_lambdas(grid: list[float], best: float) -> list[float]:
    """Log-spaced λ values strictly between the best λ's grid neighbours."""
    idx = grid.index(best)
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, len(grid) - 1)]
    if lo == hi:
        return []
    known = set(grid)
    return [float(v) for v in np.geomspace(lo, hi, REFINE_POINTS) if float(v) not in known]


def compute_front_speed(
    query: FrontSpeedQuery,
    flow: FlowModel,
    p: KppParams,
    engine: EngineConfig | None = None,
) -> FrontSpeedResult:
    """Grid search of μ(λe)/(z, λe) over the query's λ grid and e candidates."""
    engine = engine if engine is not None else EngineConfig()
    z = query.z_vector
    if len(z) != flow.dim:
        raise ContractError(f"z is {len(z)}D but the flow is {flow.dim}D")
    directions = [e / np.linalg.norm(e) for e in query.e_search.directions(z)]
    directions = [e for e in directions if float(e @ z) > _ADMISSIBLE_EPS]
    if not directions:
        raise ContractError("no admissible direction e with (z, e) > 0")

    grid = sorted(set(query.lambda_grid))
    pairs = [(lam, e) for e in directions for lam in grid]
    samples = _evaluate(pairs, z, flow, p, engine, query.estimator)

    if query.refine and len(grid) > 1:
        best = _best(samples)
        extra = _refinement_lambdas(grid, best.lam)
        if extra:
            e_best = np.asarray(best.e)
            samples += _evaluate([(lam, e_best) for lam in extra], z, flow, p, engine, query.estimator)

    best = _best(samples)
    return FrontSpeedResult(best.ratio, best.lam, best.e, best.mu, tuple(samples))


# ---------------------------------------------------------------------------
# Amplitude sweeps
# ---------------------------------------------------------------------------

class SweepRow(NamedTuple):
    delta: float
    seed: int
    c_star: float
    lambda_opt: float
    e_opt: tuple[float, ...]


class SweepSummary(NamedTuple):
    delta: float
    c_star_mean: float
    c_star_stderr: float
    n_seeds: int


@dataclass(frozen=True, slots=True)
class SweepTable:
    """Per-(δ, seed) front speeds, their per-δ averages and the log-log fit."""

    rows: tuple[SweepRow, ...]
    summary: tuple[SweepSummary, ...]
    fit: SlopeFit | None = None
    samples: tuple[tuple[float, int, FrontSpeedSample], ...] = ()


def _summarise(rows: list[SweepRow]) -> list[SweepSummary]:
    out = []
    for delta in sorted({r.delta for r in rows}):
        values = np.array([r.c_star for r in rows if r.delta == delta])
        stderr = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        out.append(SweepSummary(delta, float(values.mean()), stderr, len(values)))
    return out


def sweep_amplitude(
    deltas,
    query: FrontSpeedQuery,
    flow_template: FlowModel,
    p: KppParams,
    engine: EngineConfig | None = None,
    seeds=(0,),
    *,
    master_seed: int = 0,
    fit_min_delta: float | None = None,
) -> SweepTable:
    """c*(δ) for every amplitude and seed, averaged over seeds, with a log-log fit.

    Each seed draws one perturbation (if the template has one) and one particle
    seed, both derived from (*master_seed*, seed), and reuses them for every δ.
    """
    engine = engine if engine is not None else EngineConfig()
    deltas = [float(d) for d in deltas]
    if not deltas or any(not (d >= 0 and math.isfinite(d)) for d in deltas):
        raise ContractError(f"amplitudes must be finite and >= 0, got {deltas}")
    rows: list[SweepRow] = []
    samples: list[tuple[float, int, FrontSpeedSample]] = []
    for seed in seeds:
        template = flow_template
        if flow_template.perturbation is not None:
            base = flow_template.perturbation
            realization = sample_realization(
                base.spectrum, base.delta_k, base.n_f, rng.derive_seed(master_seed, "field", seed)
            )
            template = FlowModel(
                flow_template.base, flow_template.delta, flow_template.epsilon,
                realization, flow_template.component,
            )
        seeded = engine.with_seed(rng.derive_seed(master_seed, "ipm", seed))
        for delta in deltas:
            result = compute_front_speed(query, template.with_delta(delta), p, seeded)
            rows.append(SweepRow(delta, seed, result.c_star, result.lambda_opt, result.e_opt))
            samples.extend((delta, seed, s) for s in result.samples)
            print(f"[front-speed] delta={delta:g} seed={seed}: c*={result.c_star:.6f} "
                  f"lambda={result.lambda_opt:.4g}")

    summary = _summarise(rows)
    fit = None
    positive = [(s.delta, s.c_star_mean) for s in summary if s.delta > 0]
    if len(positive) >= 2:
        fit = fit_loglog_slope(positive, min_x=fit_min_delta)
    return SweepTable(tuple(rows), tuple(summary), fit, tuple(samples))


def fit_loglog_slope(points, min_x: float | None = None) -> SlopeFit:
    """OLS line through (log x, log y); *min_x* keeps only the large-x branch."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ContractError(f"points must be (x, y) pairs, got shape {pts.shape}")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ContractError("log-log fit needs finite positive x and y")
    if min_x is not None:
        pts = pts[pts[:, 0] >= min_x]
    if len(np.unique(pts[:, 0])) < 2:
        raise ContractError("log-log fit needs at least 2 distinct x values")
    fit = linregress(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.stderr))
