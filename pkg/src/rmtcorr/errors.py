"""Exception types raised across the package."""

from __future__ import annotations


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class InfeasibleMomentsError(ValueError):
    """Power sums that no nonnegative spectrum can produce."""
