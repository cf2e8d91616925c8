"""Shared exception types.

Every shape mismatch is a hard error; nothing in this package broadcasts
its way around a bad dimension.
"""


class DimensionError(ValueError):
    """Operands have incompatible shapes or non-finite entries."""


class SizeError(ValueError):
    """Problem size outside the supported range (e.g. factorial blowup guard)."""


class DegenerateTrackError(ValueError):
    """Track has no usable segments (or coincident endpoints where forbidden)."""


class PatternInstabilityError(RuntimeError):
    """A gradient step flipped the ReLU activation pattern; shrink the step."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


class FormatError(ValueError):
    """A file failed structural validation (bad magic, truncation, checksum)."""
