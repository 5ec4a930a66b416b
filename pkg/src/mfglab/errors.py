"""Exception types shared across the solvers and the experiment harness."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration. Carries every validation failure, not just the first."""

    def __init__(self, errors: list[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DivergenceError(RuntimeError):
    """A trajectory left the configured blow-up bound."""


class CFLError(RuntimeError):
    """Explicit transport step violated the CFL restriction."""

    def __init__(self, message: str, step: int | None = None, face: int | None = None):
        super().__init__(message)
        self.step = step
        self.face = face


class NumericalError(RuntimeError):
    """Non-finite value produced inside a solver (with location context)."""
