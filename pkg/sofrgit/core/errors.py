# sofrgit/core/errors.py
"""
Exception hierarchy shared by the pricing engines and the CLI.

Value-type problems (bad config, arguments outside a domain, mismatched arrays)
subclass ValueError. Failures of the numerics themselves subclass NumericalError,
which remembers which module/operation raised so the CLI can report it.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ContractError(ValueError):
    """Caller broke an operation's input contract (lengths, history, day counts)."""


class NumericalError(RuntimeError):
    def __init__(self, message: str, *, module: str = "", operation: str = "") -> None:
        super().__init__(message)
        self.module = module
        self.operation = operation

    @property
    def where(self) -> str:
        if self.module and self.operation:
            return f"{self.module}.{self.operation}"
        return self.module or self.operation or "unknown"


class SingularityError(NumericalError):
    """Evaluation at a singular point (t <= t0 for C/Q, tau below the kernel threshold)."""


class NumericalInstabilityError(NumericalError):
    """The discretization cannot proceed (non-positive denominators, unrepairable CFL)."""


class ConvergenceError(NumericalError):
    """An iteration hit its sweep limit without meeting tolerance."""


class DensityError(NumericalError):
    """A transition density failed its unit-mass check."""
