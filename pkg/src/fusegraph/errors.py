"""Exception hierarchy for the engine.

Every exception carries a stable ``code`` string. The HTTP service reuses the
same codes on the wire, so error names here are part of the public contract.
"""

from __future__ import annotations


class FusegraphError(Exception):
    """Base class; ``code`` is the machine-readable error identifier."""

    code = "Internal"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class DuplicateIdError(FusegraphError):
    code = "DuplicateId"


class EmptyContentError(FusegraphError):
    code = "EmptyContent"


class InvalidTimestampError(FusegraphError):
    code = "InvalidTimestamp"


class InvalidMutationError(FusegraphError):
    code = "InvalidMutation"


class UnknownEndpointError(FusegraphError):
    code = "UnknownEndpoint"


class SelfLoopError(FusegraphError):
    code = "SelfLoop"


class DuplicateEdgeError(FusegraphError):
    code = "DuplicateEdge"


class UnknownNodeError(FusegraphError):
    code = "UnknownNode"


class TooFewNodesError(FusegraphError):
    code = "TooFewNodes"


class DimensionMismatchError(FusegraphError):
    code = "DimensionMismatch"


class RemoteUnavailableError(FusegraphError):
    code = "RemoteUnavailable"


class MissingEmbeddingError(FusegraphError):
    code = "MissingEmbedding"


class MissingSignatureError(FusegraphError):
    code = "MissingSignature"


class EmptyInputError(FusegraphError):
    code = "EmptyInput"


class IndexNotBuiltError(FusegraphError):
    code = "IndexNotBuilt"


class EmptyQueryError(FusegraphError):
    code = "EmptyQuery"


class UnresolvableIntentError(FusegraphError):
    code = "UnresolvableIntent"


class ParseError(FusegraphError):
    """Malformed ingest line; carries the 1-based line number."""

    code = "ParseError"

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ConfigError(FusegraphError):
    code = "ConfigError"


class UnknownSuiteError(FusegraphError):
    code = "UnknownSuite"


class SnapshotCorruptError(FusegraphError):
    code = "SnapshotCorrupt"


class BindFailureError(FusegraphError):
    code = "BindFailure"


class BusyError(FusegraphError):
    """Mutation queue is full; the caller may retry."""

    code = "Busy"
