"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/configuration problems exit 2,
data and file-format problems exit 3, architecture mismatches exit 4.
"""


class CollmError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(CollmError):
    """An operation was called in a way that can never be valid (empty
    input list, missing forward cache, unknown report format)."""


class ConfigError(CollmError):
    """Invalid hyperparameter or architecture configuration."""


class ShapeError(CollmError):
    """Tensor arguments whose shapes do not fit the operation."""


class DataError(CollmError):
    """Semantically invalid data: bad labels, mismatched ids or
    dimensions, degenerate datasets."""


class FormatError(CollmError):
    """A file does not conform to the AEMB or ACKP wire format.

    ``offset`` is the byte offset at which parsing failed, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IncompatibleArchitectureError(CollmError):
    """Checkpoints whose architecture hashes differ were combined."""


class DegenerateWeightsError(CollmError):
    """A normalization group has zero (or non-finite) L1 norm."""


class NumericsError(CollmError):
    """A non-finite value appeared where the training loop requires a
    finite one (loss or gradient)."""
