"""Exception hierarchy. CLI exit codes hang off the three top-level families."""

from __future__ import annotations


class ColmatchError(Exception):
    """Base class for all package errors."""


class ValidationError(ColmatchError):
    """Bad input: malformed files, inconsistent config, stale artifacts."""


class SchemaError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class StaleArtifactError(ValidationError):
    pass


class EmptyCorpusError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class NormalizationError(ValidationError):
    pass


class ContextBudgetExceededError(ValidationError):
    pass


class ParseError(ValidationError):
    """An LLM response did not follow the requested output format."""


class ProviderError(ColmatchError):
    pass


class TransportError(ProviderError):
    """Retryable failure talking to a provider."""


class ProviderTimeoutError(TransportError):
    pass


class ProviderRefusalError(ProviderError):
    """The provider answered but rejected the request; not retried."""


class EvaluationError(ColmatchError):
    pass


class MissingGroundTruthError(EvaluationError):
    pass


class SchemaMismatchError(EvaluationError):
    pass
