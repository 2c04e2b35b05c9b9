"""
Error hierarchy shared by every layer of the package.
"""

from typing import Optional


class GrapheneError(Exception):
    """Base class for all errors raised by graphene_faae."""


class InvalidArgumentError(GrapheneError, ValueError):
    """A primitive was called with malformed input (e.g. a bad key length)."""


class PaddingError(GrapheneError):
    """CBC plaintext padding is invalid after decryption."""


class KeyGenerationError(GrapheneError):
    """The entropy source failed or returned too few bytes."""


class ChainExhaustedError(GrapheneError):
    """The key chain index cannot advance any further."""


class InvalidConfigError(GrapheneError, ValueError):
    """An InstantiationConfig combination is not supported."""


class PrecomputeError(GrapheneError):
    """Offline precomputation could not build the table."""


class OutOfWindowError(GrapheneError):
    """An index lies outside the current window."""

    def __init__(self, index: int, start: int, count: int):
        self.index = index
        self.start = start
        self.count = count
        super().__init__(
            f"index {index} outside window [{start}, {start + count})"
        )


class ReuseError(GrapheneError):
    """One-time material was requested a second time."""

    def __init__(self, index: int, what: str = "entry"):
        self.index = index
        super().__init__(f"{what} for index {index} already consumed")


class WindowMismatchError(GrapheneError):
    """A batch or aggregate does not cover exactly one configured window."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"window size mismatch: expected {expected}, got {actual}")


class OversizeError(GrapheneError):
    """A message is longer than the configured maximum."""

    def __init__(self, index: int, length: int, limit: int):
        self.index = index
        self.length = length
        self.limit = limit
        super().__init__(
            f"message at index {index} is {length} bytes, limit is {limit}"
        )


class SyncError(GrapheneError):
    """Verifier state is not synchronized with the batch start index."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"verifier expects index {expected}, batch starts at {actual}")


class VerificationError(GrapheneError):
    """The aggregate tag did not verify. Carries no plaintext."""

    def __init__(self, start_index: int):
        self.start_index = start_index
        super().__init__(f"aggregate verification failed for window starting at {start_index}")


class DecodeError(GrapheneError, ValueError):
    """A binary record could not be parsed."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at byte {position})"
        super().__init__(message)


class EncodeError(GrapheneError):
    """A value cannot be represented in the wire format."""


class ForbiddenError(GrapheneError):
    """The operation requires an explicit opt-in that is not present."""


class UsageError(GrapheneError):
    """Command-line arguments are inconsistent."""
