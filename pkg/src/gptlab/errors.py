"""Exception types raised across the package."""


class GPTError(ValueError):
    """Base class for invalid GPT objects or requests."""


class DimensionError(GPTError):
    pass


class InvalidStateError(GPTError):
    pass


class InvalidEffectError(GPTError):
    pass


class InvalidMeasurementError(GPTError):
    pass


class InvalidSpaceError(GPTError):
    pass


class InvalidTransformationError(GPTError):
    pass


class NotInvertibleError(GPTError):
    """Raised with a refutation when a transformation is not an affine bijection."""

    def __init__(self, reason: str, vertex: int | None = None, margin: float | None = None):
        self.reason = reason
        self.vertex = vertex
        self.margin = margin
        msg = reason
        if vertex is not None:
            msg += f" (vertex {vertex})"
        if margin is not None:
            msg += f" [margin {margin:.3g}]"
        super().__init__(msg)


class InvalidCompositeError(GPTError):
    pass


class LPError(GPTError):
    pass


class ScenarioError(GPTError):
    pass


class TraceFormatError(GPTError):
    pass


class ChainInequalityError(GPTError):
    pass


class SchemaError(GPTError):
    """Malformed input file; the message names the offending field."""
