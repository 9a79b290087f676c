"""Random Fourier synthesis of stationary Gaussian scalar fields.

A realization with equispaced spectrum k_j = j·Δk is

    ξ(x) = Σ_{j=0}^{N_F} √(2 E(k_j) Δk_j) [ζ_j cos(2π k_j x) + η_j sin(2π k_j x)]

with Δk_0 = Δk/2, Δk_j = Δk otherwise, and i.i.d. standard normal ζ_j, η_j.
Coefficient j is the j-th draw of the ``zeta`` / ``eta`` stream keyed by the
seed, so refinement extends a realization without touching existing modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import j0

from . import rng
from .errors import CapacityError, ContractError, SpectrumError
from .models import Estimate
from .spectra import SpectralDensity, get_spectrum

# ---------------------------------------------------------------------------
# Configuration constants
# ---------------------------------------------------------------------------
DEFAULT_DELTA_K = 1.0 / (20.0 * math.pi)
MAX_MODES = 1 << 20

# Tail sums stop once increments stay below this fraction of the running sum
# for _TAIL_STREAK consecutive terms.
_TAIL_REL_TOL = 1e-14
_TAIL_STREAK = 10
_TAIL_MAX_TERMS = 10_000_000
_TAIL_CHUNK = 4096

# Absolute tolerance on the neglected tail for correlation_exact.
CORRELATION_TAIL_TOL = 1e-8

# Evaluation chunk (positions per block) to bound the positions × modes matrix.
_EVAL_CHUNK = 2048


def wavenumbers(delta_k: float, n_f: int) -> np.ndarray:
    return np.arange(n_f + 1, dtype=float) * delta_k


def mode_widths(delta_k: float, n_f: int) -> np.ndarray:
    """Δk_j: half width for the zero mode, full width elsewhere."""
    widths = np.full(n_f + 1, delta_k, dtype=float)
    widths[0] = 0.5 * delta_k
    return widths


def mode_amplitudes(spectrum: SpectralDensity, delta_k: float, n_f: int) -> np.ndarray:
    """√(2 E(k_j) Δk_j) for j = 0..n_f."""
    energy = spectrum(wavenumbers(delta_k, n_f))
    if np.any(energy < 0) or not np.all(np.isfinite(energy)):
        raise SpectrumError(f"spectrum '{spectrum.name}' is negative or non-finite on the mode grid")
    return np.sqrt(2.0 * energy * mode_widths(delta_k, n_f))


@dataclass(frozen=True, slots=True, eq=False)
class FieldRealization:
    """Frozen coefficients of one random Fourier realization."""

    delta_k: float               # Δk (cycles per unit length)
    n_f: int                     # N_F
    zeta: np.ndarray             # ζ_0..ζ_{N_F}
    eta: np.ndarray              # η_0..η_{N_F}
    spectrum: SpectralDensity
    seed: int

    def __post_init__(self) -> None:
        zeta = np.array(self.zeta, dtype=float)
        eta = np.array(self.eta, dtype=float)
        if len(zeta) != self.n_f + 1 or len(eta) != self.n_f + 1:
            raise ContractError(
                f"expected {self.n_f + 1} coefficient pairs, got {len(zeta)} zeta / {len(eta)} eta"
            )
        zeta.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "eta", eta)
        amps = mode_amplitudes(self.spectrum, self.delta_k, self.n_f)
        amps.setflags(write=False)
        object.__setattr__(self, "_amplitudes", amps)

    _amplitudes: np.ndarray = field(init=False, repr=False, default=None)

    @property
    def period(self) -> float:
        return 1.0 / self.delta_k

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    def __call__(self, x) -> np.ndarray:
        return eval_scalar(self, x)


def sample_realization(
    spectrum: SpectralDensity,
    delta_k: float = DEFAULT_DELTA_K,
    n_f: int = 400,
    seed: int = 0,
) -> FieldRealization:
    """Draw the 2(N_F+1) coefficients of a realization from the seed's streams."""
    if n_f < 0:
        raise ContractError(f"n_f must be >= 0, got {n_f}")
    if not (delta_k > 0 and math.isfinite(delta_k)):
        raise ContractError(f"delta_k must be positive, got {delta_k}")
    if n_f + 1 > MAX_MODES:
        raise CapacityError(f"n_f={n_f} exceeds the maximum of {MAX_MODES - 1} modes")
    zeta = rng.normals(seed, "zeta", size=n_f + 1)
    eta = rng.normals(seed, "eta", size=n_f + 1)
    return FieldRealization(delta_k, n_f, zeta, eta, spectrum, seed)


def eval_scalar(r: FieldRealization, x) -> np.ndarray:
    """Evaluate the realization at scalar position(s) *x* (any shape)."""
    xs = np.asarray(x, dtype=float)
    flat = xs.reshape(-1)
    out = np.empty_like(flat)
    k = wavenumbers(r.delta_k, r.n_f)
    a_zeta = r.amplitudes * r.zeta
    a_eta = r.amplitudes * r.eta
    for start in range(0, flat.size, _EVAL_CHUNK):
        chunk = flat[start:start + _EVAL_CHUNK]
        phase = 2.0 * np.pi * np.outer(chunk, k)
        out[start:start + _EVAL_CHUNK] = np.cos(phase) @ a_zeta + np.sin(phase) @ a_eta
    return out.reshape(xs.shape)


def refine(r: FieldRealization, *, max_modes: int = MAX_MODES) -> FieldRealization:
    """Double the mode count at fixed Δk, keeping existing coefficients.

    An N_F = 0 realization refines to N_F = 1.
    """
    n_child = max(1, 2 * r.n_f)
    if n_child + 1 > max_modes:
        raise CapacityError(
            f"refining n_f={r.n_f} -> {n_child} exceeds the maximum of {max_modes - 1} modes"
        )
    # Stream position j is mode j; the prefix reproduces the parent's draws.
    fresh_zeta = rng.normals(r.seed, "zeta", size=n_child + 1)[r.n_f + 1:]
    fresh_eta = rng.normals(r.seed, "eta", size=n_child + 1)[r.n_f + 1:]
    return FieldRealization(
        r.delta_k,
        n_child,
        np.concatenate([r.zeta, fresh_zeta]),
        np.concatenate([r.eta, fresh_eta]),
        r.spectrum,
        r.seed,
    )


# ---------------------------------------------------------------------------
# Correlation functions and truncation bounds
# ---------------------------------------------------------------------------

def _kernel(dim: int, arg: np.ndarray) -> np.ndarray:
    """Radial kernel at 2π k r for the given dimension (1 at the origin)."""
    if dim == 1:
        return np.cos(arg)
    if dim == 2:
        return j0(arg)
    if dim == 3:
        return np.sinc(arg / np.pi)
    raise ContractError(f"dim must be 1, 2 or 3, got {dim}")


def correlation_truncated(
    spectrum: SpectralDensity, delta_k: float, dim: int, r, n_f: int,
) -> np.ndarray:
    """R̃(r) = 2 Σ_{j=0}^{n_f} E(k_j) Δk_j K(2π k_j r) for scalar or array *r*."""
    rs = np.asarray(r, dtype=float)
    k = wavenumbers(delta_k, n_f)
    weights = 2.0 * spectrum(k) * mode_widths(delta_k, n_f)
    arg = 2.0 * np.pi * np.multiply.outer(rs, k)
    return _kernel(dim, arg) @ weights


def tail_sum(spectrum: SpectralDensity, delta_k: float, start: int) -> float:
    """g(start) = 2 Σ_{j>=start} E(k_j) Δk, summed until increments stall."""
    total = 0.0
    streak = 0
    j = start
    while j - start < _TAIL_MAX_TERMS:
        k = np.arange(j, j + _TAIL_CHUNK, dtype=float) * delta_k
        inc = 2.0 * spectrum(k) * delta_k
        if j == 0:
            inc[0] *= 0.5
        if np.any(inc < 0) or not np.all(np.isfinite(inc)):
            raise SpectrumError(f"spectrum '{spectrum.name}' is negative or non-finite in its tail")
        for value in inc:
            total += value
            if value <= _TAIL_REL_TOL * total:
                streak += 1
                if streak >= _TAIL_STREAK:
                    return total
            else:
                streak = 0
        j += _TAIL_CHUNK
    raise SpectrumError(
        f"tail of spectrum '{spectrum.name}' not summable within {_TAIL_MAX_TERMS} terms "
        f"(partial sum {total:.6g} from j={start})"
    )


def truncation_error_bound(spectrum: SpectralDensity, delta_k: float, n_f: int) -> float:
    """g(N_F + 1), a uniform-in-r bound on |R - R̃_{N_F}|."""
    return tail_sum(spectrum, delta_k, n_f + 1)


def correlation_exact(
    spectrum: SpectralDensity,
    delta_k: float,
    dim: int,
    r,
    n_terms: int | None = None,
    *,
    tail_tol: float = CORRELATION_TAIL_TOL,
) -> np.ndarray:
    """Partial sum of the dimension-appropriate correlation series.

    With ``n_terms=None`` the series is extended by doubling until the
    neglected tail falls below *tail_tol*.
    """
    if n_terms is None:
        n_terms = 64
        while tail_sum(spectrum, delta_k, n_terms + 1) > tail_tol:
            n_terms *= 2
            if n_terms > _TAIL_MAX_TERMS:
                raise SpectrumError(f"correlation series of '{spectrum.name}' does not converge")
    else:
        tail = tail_sum(spectrum, delta_k, n_terms + 1)
        if tail > tail_tol:
            raise ContractError(
                f"n_terms={n_terms} leaves a tail of {tail:.3e} above tolerance {tail_tol:.1e}"
            )
    return correlation_truncated(spectrum, delta_k, dim, r, n_terms)


def correlation_empirical(
    spectrum: SpectralDensity,
    delta_k: float,
    n_f: int,
    r: float,
    n_seeds: int,
    *,
    n_points: int = 64,
    seed: int = 0,
) -> Estimate:
    """Monte Carlo estimate of E[ξ(x_0) ξ(x_0 + r)] over realizations and base points.

    Realization s uses the seed derived from (*seed*, s); base points are
    uniform on one period. The standard error is taken across realizations.
    """
    if n_seeds < 2:
        raise ContractError(f"n_seeds must be >= 2, got {n_seeds}")
    period = 1.0 / delta_k
    per_seed = np.empty(n_seeds)
    for s in range(n_seeds):
        field = sample_realization(spectrum, delta_k, n_f, rng.derive_seed(seed, "field", s))
        x0 = rng.stream(seed, "empirical", s).uniform(0.0, period, size=n_points)
        per_seed[s] = float(np.mean(eval_scalar(field, x0) * eval_scalar(field, x0 + r)))
    value = float(np.mean(per_seed))
    stderr = float(np.std(per_seed, ddof=1) / math.sqrt(n_seeds))
    return Estimate(value, stderr)


def refinement_l2_differences(
    spectrum: SpectralDensity,
    delta_k: float,
    n_f0: int,
    levels: int,
    seeds,
    *,
    n_grid: int = 8192,
) -> list[Estimate]:
    """Mean ‖v_{j+1} - v_j‖_{L²(0, 1/Δk)} over *seeds* for j = 0..levels-1.

    The norm uses the periodic trapezoid rule on *n_grid* nodes.
    """
    seeds = list(seeds)
    period = 1.0 / delta_k
    x = np.arange(n_grid) * (period / n_grid)
    norms = np.empty((len(seeds), levels))
    for i, s in enumerate(seeds):
        current = sample_realization(spectrum, delta_k, n_f0, s)
        values = eval_scalar(current, x)
        for level in range(levels):
            child = refine(current)
            child_values = eval_scalar(child, x)
            norms[i, level] = math.sqrt(period * float(np.mean((child_values - values) ** 2)))
            current, values = child, child_values
    out = []
    for level in range(levels):
        col = norms[:, level]
        stderr = float(np.std(col, ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        out.append(Estimate(float(np.mean(col)), stderr))
    return out


# ---------------------------------------------------------------------------
# Spectrum property checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class SpectrumReport:
    """Sampled checks of integrability, boundedness and tail decay."""

    name: str
    integral: float          # ∫_0^{k_max} E dk (trapezoid)
    e_at_zero: float
    max_e: float
    max_de: float
    max_d2e: float
    tail_decay_ok: bool      # g(y)·y² non-increasing over the sampled octaves

    @property
    def ok(self) -> bool:
        finite = all(
            math.isfinite(v) for v in (self.integral, self.e_at_zero, self.max_e, self.max_de, self.max_d2e)
        )
        return finite and self.tail_decay_ok


def check_spectrum(
    spectrum: SpectralDensity,
    delta_k: float = DEFAULT_DELTA_K,
    *,
    n_samples: int = 20_001,
    k_max: float = 50.0,
) -> SpectrumReport:
    """Numerically check nonnegativity, integrability, smoothness and tail decay."""
    k = np.linspace(0.0, k_max, n_samples)
    energy = spectrum(k)
    if np.any(energy < 0):
        where = float(k[np.argmax(energy < 0)])
        raise SpectrumError(f"spectrum '{spectrum.name}' is negative at k={where:.6g}")
    h = k[1] - k[0]
    # The first difference is skipped: cusps like |k|^{1/2} at the origin are allowed.
    de = np.diff(energy) / h
    d2e = np.diff(energy, 2) / h**2
    octaves = [2**i for i in range(4, 12)]
    scaled = [tail_sum(spectrum, delta_k, y) * y**2 for y in octaves]
    late = scaled[len(scaled) // 2:]
    tail_ok = all(later <= earlier * (1 + 1e-9) for earlier, later in zip(late, late[1:]))
    return SpectrumReport(
        name=spectrum.name,
        integral=float(trapezoid(energy, k)),
        e_at_zero=float(energy[0]),
        max_e=float(np.max(energy)),
        max_de=float(np.max(np.abs(de[1:]))) if de.size > 1 else 0.0,
        max_d2e=float(np.max(np.abs(d2e[1:]))) if d2e.size > 1 else 0.0,
        tail_decay_ok=tail_ok,
    )


# ---------------------------------------------------------------------------
# JSON replay documents
# ---------------------------------------------------------------------------

def realization_to_dict(r: FieldRealization) -> dict:
    return {
        "delta_k": r.delta_k,
        "n_f": r.n_f,
        "seed": r.seed,
        "spectrum_name": r.spectrum.name,
        "zeta": [float(v) for v in r.zeta],
        "eta": [float(v) for v in r.eta],
    }


def realization_from_dict(doc: dict) -> FieldRealization:
    return FieldRealization(
        float(doc["delta_k"]),
        int(doc["n_f"]),
        np.asarray(doc["zeta"], dtype=float),
        np.asarray(doc["eta"], dtype=float),
        get_spectrum(doc["spectrum_name"]),
        int(doc["seed"]),
    )
