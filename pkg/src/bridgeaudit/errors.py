"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all package errors."""


class LexError(AuditError):
    """Source bytes could not be decoded."""


class SchemaError(AuditError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class InvalidPattern(AuditError):
    def __init__(self, regex: str, reason: str):
        super().__init__(f"invalid pattern {regex!r}: {reason}")
        self.regex = regex
        self.reason = reason


class UnknownFunction(AuditError):
    def __init__(self, function_id: str):
        super().__init__(f"unknown function: {function_id}")
        self.function_id = function_id


class UnknownSeed(AuditError):
    def __init__(self, seed: str):
        super().__init__(f"seed matches no declaration in scope: {seed}")
        self.seed = seed


class UnrenderableKind(AuditError):
    pass


class SideMismatch(AuditError):
    pass


class MissingSignature(AuditError):
    pass


class PredicateError(AuditError):
    pass


class AllProducersFailed(AuditError):
    pass


class EvaluatorFailed(AuditError):
    pass


class EmptyInput(AuditError):
    pass


class TransportError(AuditError):
    """A single provider call failed before producing text."""


class ProviderUnavailable(AuditError):
    pass


class DimMismatch(AuditError):
    pass


class DuplicatePatternId(AuditError):
    pass


class DuplicatePointId(AuditError):
    pass


class ConfigError(AuditError):
    pass
