"""Exception types shared across the solver pipeline."""

from __future__ import annotations


class SingularShiftError(RuntimeError):
    """The shifted matrix A - sigma*B hit an exactly singular pivot."""


class ConvergenceError(RuntimeError):
    """Iteration failed to reach the requested residual tolerance."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class InsufficientSpectrumError(RuntimeError):
    """Captured decomposition weight below the renormalization threshold."""

    def __init__(self, message: str, captured_weight: float | None = None):
        super().__init__(message)
        self.captured_weight = captured_weight


class NoThresholdError(RuntimeError):
    """No 10%-ionization crossing found below the configured field maximum."""


class StepSizeError(RuntimeError):
    """Grid propagation unstable at the requested time step."""


class AccuracyError(RuntimeError):
    """Grid too coarse or too small for the requested bound states."""
