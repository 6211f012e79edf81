"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach its requested accuracy.

    ``estimate`` carries the best error estimate that was achieved.
    """

    def __init__(self, message: str, estimate: float = float("nan")) -> None:
        super().__init__(message)
        self.estimate = estimate


class GateRejected(RuntimeError):
    """The contraction constant is not below one and no override was given."""

    def __init__(self, delta: float, message: str | None = None) -> None:
        super().__init__(message or f"contraction gate rejected: delta = {delta:.6g} >= 1")
        self.delta = delta


class NonConvergence(RuntimeError):
    """Fixed-point iteration stopped without meeting its tolerance."""

    def __init__(self, message: str, report=None, diverged: bool = False) -> None:
        super().__init__(message)
        self.report = report
        self.diverged = diverged
