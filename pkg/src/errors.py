"""Exception hierarchy shared by every module.

The CLI maps :class:`ConfigError` and :class:`ContractError` to exit code 2
and every other :class:`KppError` to exit code 3.
"""

from __future__ import annotations


class KppError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KppError, ValueError):
    """Run configuration failed schema or range validation."""


class ContractError(KppError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class SpectrumError(KppError):
    """Spectral density is negative somewhere or its tail is not summable."""


class CapacityError(KppError):
    """Refinement would exceed the configured maximum mode count."""


class NumericalError(KppError):
    """Runtime numerical failure (blow-up, degeneracy, non-convergence)."""


class BlowUpError(NumericalError):
    """A particle position became non-finite."""

    def __init__(self, particle: int, generation: int, mutation: int) -> None:
        self.particle = particle
        self.generation = generation
        self.mutation = mutation
        super().__init__(
            f"non-finite position for particle {particle} "
            f"(generation {generation}, mutation {mutation})"
        )


class DegeneracyError(NumericalError):
    """Weights or masses cannot be normalised."""


class ConvergenceError(NumericalError):
    """An iterative eigensolver did not converge."""

    def __init__(self, message: str, residual: float) -> None:
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class EstimatorError(NumericalError):
    """A μ estimator failed at one (λ, e) sample."""

    def __init__(self, lam: float, e: tuple[float, ...], cause: Exception) -> None:
        self.lam = lam
        self.e = e
        super().__init__(
            f"estimator failed at lambda={lam:.6g}, e={tuple(round(v, 6) for v in e)}: {cause}"
        )
