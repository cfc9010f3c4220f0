"""Exception types shared across the package."""

from __future__ import annotations


class EmbedchanError(Exception):
    """Base class for all errors raised by embedchan."""


class ModelValidationError(EmbedchanError, ValueError):
    """A model definition violates the config schema or an invariant."""


class HermiticityError(ModelValidationError):
    """A matrix that must be Hermitian is not; message names the entry."""


class DimensionError(ModelValidationError):
    """Matrix blocks have incompatible shapes; message names both blocks."""


class DecimationError(EmbedchanError, RuntimeError):
    """Surface Green function iteration failed to reach its residual target."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class SingularSolveError(EmbedchanError, RuntimeError):
    """A linear solve was singular or failed its residual check."""

    def __init__(self, message: str, cond: float | None = None):
        super().__init__(message)
        self.cond = cond


class BlochSolveError(EmbedchanError, RuntimeError):
    """The quadratic Bloch pencil was defective or ill conditioned."""


class ChannelCountMismatchError(EmbedchanError, ValueError):
    """Outgoing Bloch states and open channels disagree in number."""


class FluxNormalizationError(EmbedchanError, ValueError):
    """Unit-flux scaling requested for a state carrying no flux."""
