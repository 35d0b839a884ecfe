"""Exception types shared across the package."""


class WtcsError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(WtcsError, ValueError):
    """An array has the wrong shape, size, or parity for the requested op."""


class PlanError(WtcsError, ValueError):
    """A measurement plan is malformed or violates its invariants."""


class InfeasiblePlanError(PlanError):
    """The requested budget cannot be met under the per-subband capacity caps."""


class OperatorError(WtcsError, RuntimeError):
    """Sampling-operator generation failed (e.g. persistent rank deficiency)."""


class DivergenceError(WtcsError, ArithmeticError):
    """The iterative solver produced a non-finite objective value."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        if message is None:
            message = f"non-finite objective at iteration {iteration}"
        super().__init__(message)


class FormatError(WtcsError, ValueError):
    """A serialized payload could not be parsed.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class PgmError(FormatError):
    """Malformed or unsupported PGM image file."""


class BitstreamError(FormatError):
    """Malformed measurement bitstream."""


class BadMagicError(BitstreamError):
    """The bitstream does not start with the expected magic bytes."""


class BadVersionError(BitstreamError):
    """The bitstream declares an unsupported format version."""


class BudgetMismatchError(BitstreamError):
    """Per-subband counts in the header do not add up to the declared rate."""


class TruncatedPayloadError(BitstreamError):
    """The payload is shorter than the header promises."""
