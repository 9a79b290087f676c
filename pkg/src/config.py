"""Run configuration: one JSON document parsed into nested frozen dataclasses.

Unknown keys are rejected at every level with their dotted path, values are
type-checked and range-checked by the section constructors. A single master
``seed`` derives every random stream; ``KPPFL_THREADS`` is the fallback for
``--threads``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import types
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import NamedTuple, Union, get_args, get_origin, get_type_hints

from . import rng
from .errors import ConfigError, ContractError
from .flow_model import FlowModel, build_flow
from .front_speed import (
    DEFAULT_CONE_DEG,
    DEFAULT_CONE_SAMPLES,
    ESearch,
    FrontSpeedQuery,
    default_e_search,
    default_lambda_grid,
)
from .models import SL_MIN_WINDOW_STEPS, DomainSpec, DualVariable, EngineConfig, IpmParams, KppParams
from .random_field import DEFAULT_DELTA_K, sample_realization
from .spectra import get_spectrum

# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------
THREADS_ENV = "KPPFL_THREADS"


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _check_field(spectrum: str, delta_k: float, n_f: int) -> None:
    try:
        get_spectrum(spectrum)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    if not delta_k > 0:
        raise ConfigError(f"delta_k must be positive, got {delta_k}")
    if n_f < 0:
        raise ConfigError(f"n_f must be >= 0, got {n_f}")


@dataclass(frozen=True, slots=True)
class FieldConfig:
    """Random Fourier perturbation and the gen-field diagnostics."""

    spectrum: str = "k05exp"
    delta_k: float = DEFAULT_DELTA_K
    n_f: int = 400
    correlation_seeds: int = 200
    correlation_points: int = 64
    r_max: float = 10.0
    r_count: int = 41
    refine_levels: int = 3
    refine_seeds: int = 20
    refine_grid: int = 8192

    def __post_init__(self) -> None:
        _check_field(self.spectrum, self.delta_k, self.n_f)
        if self.correlation_seeds < 2 or min(self.correlation_points, self.r_count) < 1:
            raise ConfigError("correlation needs >= 2 seeds and >= 1 point and r value")
        if self.refine_levels < 1 or self.refine_seeds < 1 or self.refine_grid < 16:
            raise ConfigError("refinement table needs levels >= 1, seeds >= 1, grid >= 16")


@dataclass(frozen=True, slots=True)
class PerturbationConfig:
    """The realization ξ of ``flow.perturbation``; overrides the ``field`` section."""

    spectrum: str = "k05exp"
    delta_k: float = DEFAULT_DELTA_K
    n_f: int = 400
    seed: int | None = None             # None: derived from the master seed

    def __post_init__(self) -> None:
        _check_field(self.spectrum, self.delta_k, self.n_f)
        if self.seed is not None and self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True, slots=True)
class FlowConfig:
    base: str = "cellular2d"
    dim: int | None = None
    delta: float = 1.0
    epsilon: float = 0.0                # perturbation present iff epsilon != 0
    component: int = 1
    perturbation: PerturbationConfig | None = None


@dataclass(frozen=True, slots=True)
class DualConfig:
    lam: float = 1.0                    # "lambda" in JSON
    e: tuple[float, ...] = (1.0, 0.0)   # normalised on use


@dataclass(frozen=True, slots=True)
class IpmConfig:
    n_particles: int = 10_000
    n_generations: int = 64
    n_mutations: int = 16
    dt: float = 2.0**-8
    dynamic_shift: bool = False
    init: str = "uniform_on_cell"
    log_every: int = 0
    tail: int = 1                       # generations averaged for front-speed μ
    seed: int | None = None             # None: derived from the master seed
    wrap_snapshot: bool = False         # run-ipm snapshot mapped into one flow period

    def __post_init__(self) -> None:
        self.params(seed=self.seed or 0, threads=1)
        if not 1 <= self.tail <= self.n_generations:
            raise ConfigError(f"tail must lie in [1, n_generations], got {self.tail}")

    def params(self, *, seed: int, threads: int) -> IpmParams:
        return IpmParams(
            self.n_particles, self.n_generations, self.n_mutations, self.dt, seed,
            self.dynamic_shift, self.init, threads, self.log_every,
        )


@dataclass(frozen=True, slots=True)
class DomainConfig:
    kind: str = "torus"
    period: tuple[float, ...] | None = None   # None: one flow period per side

    def __post_init__(self) -> None:
        if self.kind not in ("torus", "unbounded"):
            raise ConfigError(f"kind must be 'torus' or 'unbounded', got {self.kind!r}")


@dataclass(frozen=True, slots=True)
class EulerianConfig:
    n_per_dim: int = 128
    dt: float = 2.0**-8
    n_steps: int = 4096
    burn_in: float = 0.5
    spectral_n_per_dim: int = 32
    spectral_axes: tuple[int, ...] | None = None
    methods: tuple[str, ...] = ("sl_cn", "spectral")

    def __post_init__(self) -> None:
        unknown = set(self.methods) - {"sl_cn", "spectral"}
        if unknown or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of sl_cn, spectral, got {self.methods}")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError(f"burn_in must lie in [0, 1), got {self.burn_in}")
        if self.n_steps - math.floor(self.n_steps * self.burn_in) < SL_MIN_WINDOW_STEPS:
            raise ConfigError(
                f"n_steps after burn_in must leave >= {SL_MIN_WINDOW_STEPS} steps, got n_steps={self.n_steps}"
            )


@dataclass(frozen=True, slots=True)
class FrontSpeedConfig:
    z: tuple[float, ...] = (1.0, 0.0)
    lambda_grid: tuple[float, ...] = field(default_factory=default_lambda_grid)
    e_search: str | None = None         # None: chosen from the flow
    cone_half_angle: float = DEFAULT_CONE_DEG
    e_samples: int = DEFAULT_CONE_SAMPLES
    estimator: str = "ipm"
    refine: bool = True
    deltas: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0)
    seeds: tuple[int, ...] = (0,)
    fit_min_delta: float | None = None

    def __post_init__(self) -> None:
        if self.estimator not in ("ipm", "sl_cn", "spectral"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise ConfigError(f"seeds must be a non-empty list of non-negative ints, got {self.seeds}")
        self.query()

    def query(self, flow: FlowModel | None = None) -> FrontSpeedQuery:
        """The (λ, e) search; an unset e_search follows :func:`default_e_search` for *flow*."""
        if self.e_search is not None:
            search = ESearch(self.e_search, self.cone_half_angle, self.e_samples)
        elif flow is not None:
            search = default_e_search(flow, self.cone_half_angle, self.e_samples)
        else:
            search = ESearch("local_cone", self.cone_half_angle, self.e_samples)
        return FrontSpeedQuery(self.z, self.lambda_grid, search, self.estimator, self.refine)


@dataclass(frozen=True, slots=True)
class StatsConfig:
    n_bins: int = 50
    tail_fraction: float = 0.5
    hist_range: tuple[float, float] | None = None   # None: [0, L) of the projected torus

    def __post_init__(self) -> None:
        if self.n_bins < 1:
            raise ConfigError(f"n_bins must be >= 1, got {self.n_bins}")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ConfigError(f"tail_fraction must lie in (0, 1], got {self.tail_fraction}")


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Everything one CLI command needs."""

    seed: int = 0                       # master seed
    threads: int = 1
    field: FieldConfig = FieldConfig()
    flow: FlowConfig = FlowConfig()
    kpp: KppParams = KppParams()
    dual: DualConfig = DualConfig()
    ipm: IpmConfig = IpmConfig()
    domain: DomainConfig = DomainConfig()
    eulerian: EulerianConfig = EulerianConfig()
    front_speed: FrontSpeedConfig = FrontSpeedConfig()
    stats: StatsConfig = StatsConfig()

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _coerce(tp, value, path: str):
    origin = get_origin(tp)
    if origin in (Union, types.UnionType):
        args = get_args(tp)
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(inner, value, path)
    if is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"'{path}' must be an object")
        return _build(tp, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"'{path}' must be a list")
        args = get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            elem_types = [args[0]] * len(value)
        else:
            if len(value) != len(args):
                raise ConfigError(f"'{path}' must have {len(args)} entries, got {len(value)}")
            elem_types = list(args)
        return tuple(_coerce(t, v, f"{path}[{i}]") for i, (t, v) in enumerate(zip(elem_types, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"'{path}' must be a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{path}' must be an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{path}' must be a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"'{path}' must be a string, got {value!r}")
        return value
    raise ConfigError(f"'{path}' has unsupported type {tp!r}")


# JSON spellings that are not Python identifiers, per section.
_JSON_KEYS = {DualConfig: {"lambda": "lam"}}


def _build(cls, doc: dict, path: str):
    hints = get_type_hints(cls)
    names = [f.name for f in fields(cls) if f.init]
    prefix = f"{path}." if path else ""
    doc = dict(doc)
    for key, name in _JSON_KEYS.get(cls, {}).items():
        if key in doc:
            if name in doc:
                raise ConfigError(f"give one of '{prefix}{key}' and '{prefix}{name}', not both")
            doc[name] = doc.pop(key)
    unknown = sorted(set(doc) - set(names))
    if unknown:
        raise ConfigError(f"unknown key '{prefix}{unknown[0]}'")
    kwargs = {}
    for name in names:
        if name in doc:
            kwargs[name] = _coerce(hints[name], doc[name], f"{path}.{name}" if path else name)
    try:
        return cls(**kwargs)
    except (ConfigError, ContractError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return _build(RunConfig, doc, "")


def config_to_dict(cfg: RunConfig) -> dict:
    doc = json.loads(json.dumps(asdict(cfg)))
    doc["dual"]["lambda"] = doc["dual"].pop("lam")
    return doc


def result_dict(cfg: RunConfig) -> dict:
    """The config minus settings that only affect speed (threads)."""
    doc = config_to_dict(cfg)
    doc.pop("threads")
    return doc


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON form of :func:`result_dict`."""
    canonical = json.dumps(result_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path | None) -> RunConfig:
    """Parse the JSON file at *path*; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)


def apply_overrides(
    cfg: RunConfig,
    *,
    seed: int | None = None,
    threads: int | None = None,
    wrap_snapshot: bool = False,
) -> RunConfig:
    """CLI flags first, then ``KPPFL_THREADS``, then the config's own values."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
            print(f"[config] threads={threads} from {THREADS_ENV}")
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if threads is not None:
        changes["threads"] = threads
    if wrap_snapshot:
        changes["ipm"] = replace(cfg.ipm, wrap_snapshot=True)
    if not changes:
        return cfg
    try:
        return replace(cfg, **changes)
    except ConfigError as exc:
        raise ConfigError(f"override: {exc}") from exc


# ---------------------------------------------------------------------------
# Domain objects
# ---------------------------------------------------------------------------

class FieldSource(NamedTuple):
    """Where a run's single realization ξ comes from."""

    spectrum: str
    delta_k: float
    n_f: int
    seed: int


def field_source(cfg: RunConfig) -> FieldSource:
    """``flow.perturbation`` when given, else the ``field`` section; unset seeds derive from the master."""
    derived = rng.derive_seed(cfg.seed, "field")
    pert = cfg.flow.perturbation
    if pert is None:
        return FieldSource(cfg.field.spectrum, cfg.field.delta_k, cfg.field.n_f, derived)
    return FieldSource(pert.spectrum, pert.delta_k, pert.n_f, pert.seed if pert.seed is not None else derived)


def make_flow(cfg: RunConfig) -> FlowModel:
    """Flow model; the perturbation is drawn from :func:`field_source` when epsilon != 0."""
    fc = cfg.flow
    perturbation = None
    if fc.epsilon != 0.0:
        source = field_source(cfg)
        perturbation = sample_realization(
            get_spectrum(source.spectrum), source.delta_k, source.n_f, source.seed,
        )
    try:
        return build_flow(
            fc.base, dim=fc.dim, delta=fc.delta, epsilon=fc.epsilon,
            perturbation=perturbation, component=fc.component,
        )
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    except ContractError as exc:
        raise ConfigError(f"flow: {exc}") from exc


def make_dual(cfg: RunConfig) -> DualVariable:
    try:
        return DualVariable.from_direction(cfg.dual.lam, cfg.dual.e)
    except ContractError as exc:
        raise ConfigError(f"dual: {exc}") from exc


def make_domain(cfg: RunConfig, flow: FlowModel) -> DomainSpec:
    period = cfg.domain.period if cfg.domain.period is not None else flow.period
    try:
        return DomainSpec(cfg.domain.kind, tuple(period))
    except ContractError as exc:
        raise ConfigError(f"domain: {exc}") from exc


def make_ipm_params(cfg: RunConfig) -> IpmParams:
    seed = cfg.ipm.seed if cfg.ipm.seed is not None else rng.derive_seed(cfg.seed, "ipm")
    return cfg.ipm.params(seed=seed, threads=cfg.threads)


def make_engine(cfg: RunConfig) -> EngineConfig:
    eu = cfg.eulerian
    return EngineConfig(
        ipm=make_ipm_params(cfg),
        ipm_domain=cfg.domain.kind,
        ipm_tail=cfg.ipm.tail,
        sl_n_per_dim=eu.n_per_dim,
        sl_dt=eu.dt,
        sl_n_steps=eu.n_steps,
        sl_burn_in=eu.burn_in,
        spectral_n_per_dim=eu.spectral_n_per_dim,
        spectral_axes=eu.spectral_axes,
        threads=cfg.threads,
    )
