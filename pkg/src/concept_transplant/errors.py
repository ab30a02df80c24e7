"""Exception hierarchy.

Every error raised by the engine derives from :class:`ConceptTransplantError`.
The three intermediate classes map onto CLI exit codes: validation (2),
transport (3) and numeric failure (4).
"""

from __future__ import annotations


class ConceptTransplantError(Exception):
    """Base class for all engine errors."""


class ValidationError(ConceptTransplantError, ValueError):
    """Input or response violates a documented contract."""


class TransportError(ConceptTransplantError):
    """A remote service could not be reached or answered with an error.

    ``retryable`` is true for timeouts, connection failures, 429 and 5xx.
    """

    def __init__(self, message: str = "", retryable: bool = False, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status


class NumericError(ConceptTransplantError):
    """A numeric routine failed to produce a usable answer."""


# -- solver / linear algebra ---------------------------------------------

class DimensionMismatch(ValidationError):
    pass


class DegenerateAtom(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class RankDeficient(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NonConvergence(NumericError):
    pass


# -- dictionaries and edits ----------------------------------------------

class SpaceMismatch(ValidationError):
    pass


class DuplicateName(ValidationError):
    pass


class ZeroAtom(ValidationError):
    pass


class UnknownConcept(ValidationError):
    pass


class KOutOfRange(ValidationError):
    pass


# -- mining ----------------------------------------------------------------

class ValidationFailed(ValidationError):
    """A model response still broke its constraints after all retries."""


class MalformedResponse(ValidationFailed):
    """A model response could not be parsed at all."""


class MissingApiKey(ValidationError):
    pass


class DimensionDrift(ValidationError):
    pass


class FixtureMissing(TransportError):
    """Replay mode found no recorded response for a request."""


# -- store -----------------------------------------------------------------

class StoreError(ValidationError):
    pass


class StoreIOError(StoreError, OSError):
    pass


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class TruncatedPayload(StoreError):
    pass


class TrailingData(StoreError):
    pass


class OversizeGuard(StoreError):
    pass


class SchemaViolation(StoreError):
    pass


class HashMismatch(StoreError):
    pass
