"""Exception types shared across the package."""


class SwarmPDEError(Exception):
    """Base class for all package errors."""


class NonFiniteEvaluation(SwarmPDEError):
    """A model function returned NaN/Inf on the sampling set."""


class DegenerateDiffusion(SwarmPDEError):
    """D vanishes at some r > 0; this regime is not supported."""


class QuadratureDivergence(SwarmPDEError):
    """The diffusivity transform integrand is not integrable near 0
    at the requested tolerance."""


class RatioUndefined(SwarmPDEError):
    """zeta2' vanishes at a sample point where E is nonzero."""


class HypothesisViolation(SwarmPDEError):
    """A discrete coefficient inequality fails on the built arrays."""


class NegativeInitialData(SwarmPDEError):
    """Initial data evaluated negative beyond roundoff."""


class GridMismatch(SwarmPDEError):
    """Fields passed to an operator do not live on the same grid."""


class NegativeField(SwarmPDEError):
    """A field constrained to be nonnegative carries negative values."""


class UnstableStep(SwarmPDEError):
    """A time step produced negative-beyond-tolerance or non-finite cells.

    Signals a violated step-size contract; the run is aborted."""


class ConfigInvalid(SwarmPDEError):
    """Configuration failed validation; carries all field-level messages."""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class ConfigMismatch(SwarmPDEError):
    """Cross-validation preconditions on the model family are not met."""


class InadmissibleTestFunction(SwarmPDEError):
    """Test function violates the support or boundary requirements."""
