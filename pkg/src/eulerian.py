"""Eulerian reference estimators of μ on periodic grids.

* SL+CN: semi-Lagrangian advection-reaction step (bilinear periodic
  interpolation at departure points, then the factor exp(cΔt)) followed by
  Crank–Nicolson diffusion applied mode by mode in Fourier space. The field is
  renormalised to unit mass after each step and the log of the mass ratio is
  accumulated; μ is the mean growth rate after burn-in.
* Fourier collocation: the operator A^λ = κΔ + b·∇ + c on a periodic grid,
  whose eigenvalue of largest real part is μ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft
from scipy.linalg import LinAlgError, eigvals
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs

from .errors import ContractError, ConvergenceError, DegeneracyError
from .flow_model import FlowModel, drift, potential
from .models import SL_MIN_WINDOW_STEPS, DualVariable, KppParams

# ---------------------------------------------------------------------------
# Configuration constants
# ---------------------------------------------------------------------------
DEFAULT_BURN_IN = 0.5
MIN_WINDOW_STEPS = SL_MIN_WINDOW_STEPS

# Collocation sizes: dense eigensolve up to DENSE_CAP nodes, Arnoldi up to MAX_NODES.
DENSE_CAP = 1024
MAX_NODES = 128 * 128
ARNOLDI_MAXITER = 20_000
ARNOLDI_TOL = 1e-10


@dataclass(frozen=True, slots=True, eq=False)
class EulerianGrid:
    """Nodal density q on an n×n periodic grid with accumulated log mass."""

    n_per_dim: int
    period: float
    q: np.ndarray            # (n, n), q >= 0, ∫q = 1 after renormalisation
    log_mass: float = 0.0
    dim: int = 2

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=float)
        if q.shape != (self.n_per_dim,) * self.dim:
            raise ContractError(f"q must have shape {(self.n_per_dim,) * self.dim}, got {q.shape}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def h(self) -> float:
        return self.period / self.n_per_dim

    @property
    def mass(self) -> float:
        """Midpoint-rule integral of q."""
        return float(self.q.sum() * self.h**self.dim)

    def nodes(self) -> np.ndarray:
        """Node coordinates as an (n², 2) array in C order."""
        axis = np.arange(self.n_per_dim) * self.h
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])


def make_grid(n_per_dim: int, period: float) -> EulerianGrid:
    """Uniform unit-mass density on [0, period)²."""
    if n_per_dim < 4:
        raise ContractError(f"n_per_dim must be >= 4, got {n_per_dim}")
    q = np.full((n_per_dim, n_per_dim), 1.0 / period**2)
    return EulerianGrid(n_per_dim, period, q)


def angular_wavenumbers(n: int, period: float) -> np.ndarray:
    return 2.0 * np.pi * fft.fftfreq(n, d=period / n)


def cn_amplification(n: int, period: float, kappa: float, dt: float) -> np.ndarray:
    """Per-mode Crank–Nicolson factor (1 - κ|k|²Δt/2) / (1 + κ|k|²Δt/2) on an n×n grid."""
    k = angular_wavenumbers(n, period)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    half = 0.5 * kappa * k2 * dt
    return (1.0 - half) / (1.0 + half)


def cn_diffuse(q: np.ndarray, period: float, kappa: float, dt: float) -> np.ndarray:
    """One Crank–Nicolson diffusion step in discrete Fourier space (real or complex q)."""
    factor = cn_amplification(q.shape[0], period, kappa, dt)
    out = fft.ifftn(fft.fftn(q) * factor)
    return out if np.iscomplexobj(q) else out.real


def sl_cn_step(
    grid: EulerianGrid,
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    dt: float,
) -> EulerianGrid:
    """Advance q by one SL advection-reaction step, one CN diffusion step, renormalise."""
    if flow.dim != 2 or grid.dim != 2:
        raise ContractError("the SL+CN solver is two-dimensional")
    n, h = grid.n_per_dim, grid.h
    x = grid.nodes()
    b = drift(flow, dual, p, x)
    reach = float(np.max(np.linalg.norm(b, axis=1))) * dt
    if reach >= 0.5 * grid.period:
        raise ContractError(
            f"departure points travel {reach:.4g} >= L/2 = {0.5 * grid.period:.4g}; reduce dt"
        )
    departure = (x - b * dt) / h
    advected = map_coordinates(grid.q, departure.T, order=1, mode="grid-wrap").reshape(n, n)
    advected = np.maximum(advected, 0.0)
    reacted = advected * np.exp(potential(flow, dual, p, x) * dt).reshape(n, n)

    diffused = np.maximum(cn_diffuse(reacted, grid.period, p.kappa, dt), 0.0)
    mass = float(diffused.sum() * h * h)
    if not (mass > 0 and math.isfinite(mass)):
        raise DegeneracyError(f"grid mass {mass!r} cannot be renormalised")
    return EulerianGrid(n, grid.period, diffused / mass, grid.log_mass + math.log(mass))


@dataclass(frozen=True, slots=True, eq=False)
class SlResult:
    """μ from the SL+CN run and its per-step log-mass increments."""

    mu: float
    increments: np.ndarray
    dt: float
    burn_in_steps: int
    grid: EulerianGrid


def run_mu_sl(
    grid0: EulerianGrid,
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    dt: float,
    n_steps: int,
    burn_in_fraction: float = DEFAULT_BURN_IN,
    *,
    log_every: int = 0,
) -> SlResult:
    """Mean log-mass growth rate over the post-burn-in window."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ContractError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
    burn_in = int(math.floor(n_steps * burn_in_fraction))
    if n_steps - burn_in < MIN_WINDOW_STEPS:
        raise ContractError(
            f"averaging window has {n_steps - burn_in} steps; need >= {MIN_WINDOW_STEPS}"
        )
    grid = grid0
    increments = np.empty(n_steps)
    for step in range(n_steps):
        before = grid.log_mass
        grid = sl_cn_step(grid, flow, dual, p, dt)
        increments[step] = grid.log_mass - before
        if log_every and (step + 1) % log_every == 0:
            print(f"[sl-cn] step {step + 1}/{n_steps}: growth={increments[step] / dt:.6f}")
    window = increments[burn_in:]
    mu = float(window.sum() / (len(window) * dt))
    return SlResult(mu, increments, dt, burn_in, grid)


# ---------------------------------------------------------------------------
# Fourier-collocation eigensolver
# ---------------------------------------------------------------------------

class _CollocationOperator:
    """Matrix-free A^λ on a periodic grid over the chosen axes."""

    def __init__(
        self,
        flow: FlowModel,
        dual: DualVariable,
        p: KppParams,
        n: int,
        period: float,
        axes: tuple[int, ...],
    ) -> None:
        self.n = n
        self.ndim = len(axes)
        self.size = n**self.ndim
        self.kappa = p.kappa
        axis = np.arange(n) * (period / n)
        mesh = np.meshgrid(*([axis] * self.ndim), indexing="ij")
        points = np.zeros((self.size, flow.dim))
        for slot, ax in enumerate(axes):
            points[:, ax] = mesh[slot].ravel()
        b = drift(flow, dual, p, points)
        self.b = [b[:, ax] for ax in axes]
        self.c = potential(flow, dual, p, points)
        k = angular_wavenumbers(n, period)
        k1 = k.copy()
        if n % 2 == 0:
            k1[n // 2] = 0.0  # Nyquist mode has no real first derivative
        self.k1 = k1
        self.k2 = k**2

    def _shape(self, m: int) -> tuple[int, ...]:
        return (self.n,) * self.ndim + (m,)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """A applied to the columns of *u* (size,) or (size, m)."""
        cols = u.reshape(self.size, -1)
        m = cols.shape[1]
        grid_axes = tuple(range(self.ndim))
        u_hat = fft.fftn(cols.reshape(self._shape(m)), axes=grid_axes)
        out = self.c[:, None] * cols
        lap_hat = np.zeros_like(u_hat)
        for slot in range(self.ndim):
            shape = [1] * (self.ndim + 1)
            shape[slot] = self.n
            ik = (1j * self.k1).reshape(shape)
            grad = fft.ifftn(ik * u_hat, axes=grid_axes).real.reshape(self.size, m)
            out = out + self.b[slot][:, None] * grad
            lap_hat = lap_hat - self.k2.reshape(shape) * u_hat
        lap = fft.ifftn(lap_hat, axes=grid_axes).real.reshape(self.size, m)
        out = out + self.kappa * lap
        return out.reshape(u.shape) if u.ndim == 1 else out

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.size))


def spectral_eigen(
    flow: FlowModel,
    dual: DualVariable,
    p: KppParams,
    n_per_dim: int,
    period: float | None = None,
    *,
    axes: tuple[int, ...] | None = None,
    method: str = "auto",
    verbose: bool = False,
) -> float:
    """Principal eigenvalue of A^λ by Fourier collocation.

    *axes* selects the discretised coordinates; the others are held at 0 and
    their derivatives dropped, which is exact when the eigenfunction does not
    depend on them (e.g. the shear flow with e along the shear). *method* is
    ``dense``, ``arnoldi`` or ``auto`` (dense up to DENSE_CAP nodes). scipy solver
    failures surface as ConvergenceError.
    """
    if axes is None:
        axes = tuple(range(flow.dim))
    if not 1 <= len(axes) <= 2 or any(not 0 <= ax < flow.dim for ax in axes):
        raise ContractError(f"collocation supports one or two of the flow axes, got {axes}")
    if period is None:
        period = flow.period[axes[0]]
    size = n_per_dim ** len(axes)
    if n_per_dim < 4 or size > MAX_NODES:
        raise ContractError(f"collocation grid of {size} nodes outside [4, {MAX_NODES}]")

    op = _CollocationOperator(flow, dual, p, n_per_dim, period, axes)
    if method == "auto":
        method = "dense" if size <= DENSE_CAP else "arnoldi"
    if method == "dense":
        try:
            values = eigvals(op.dense())
        except (LinAlgError, ValueError) as exc:  # ValueError: non-finite operator entries
            raise ConvergenceError(f"dense eigensolver failed on {size} nodes: {exc}", math.inf) from exc
        mu = float(values[np.argmax(values.real)].real)
    elif method == "arnoldi":
        mu = _arnoldi_mu(op, size)
    else:
        raise ContractError(f"unknown eigensolver method {method!r}")
    if not math.isfinite(mu):
        raise ConvergenceError(f"{method} eigensolver returned mu={mu}", math.inf)
    if verbose:
        print(f"[spectral] {method} on {size} nodes: mu={mu:.8f}")
    return mu


def _arnoldi_mu(op: _CollocationOperator, size: int) -> float:
    linear = LinearOperator((size, size), matvec=op.apply, dtype=float)
    try:
        values, _ = eigs(
            linear, k=1, which="LR", v0=np.ones(size), tol=ARNOLDI_TOL,
            maxiter=ARNOLDI_MAXITER, ncv=min(size - 1, 64),
        )
    except ArpackNoConvergence as exc:
        residual = math.inf
        if len(exc.eigenvalues):
            vec = exc.eigenvectors[:, 0]
            residual = float(np.linalg.norm(op.apply(vec.real) - exc.eigenvalues[0].real * vec.real))
        raise ConvergenceError("Arnoldi iteration did not converge", residual) from exc
    except ArpackError as exc:
        raise ConvergenceError(f"Arnoldi iteration failed: {exc}", math.inf) from exc
    return float(values[0].real)
