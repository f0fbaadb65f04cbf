"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data
and provider problems exit 3, numeric failures during training exit 4.
"""


class AnosoundError(Exception):
    """Base class for all package errors."""


class ConfigError(AnosoundError):
    """Invalid run configuration, synthesis spec, or detector hyperparameters."""


class DataError(AnosoundError):
    """Base class for corpus, manifest, and provider problems."""


class CorpusNotFoundError(DataError):
    """Corpus root missing or empty."""


class InvalidCorpusError(DataError):
    """Corpus present but structurally unusable (e.g. a machine type without train clips)."""


class ProviderError(DataError):
    """Embedding provider unavailable or its cache incomplete."""


class InvalidCacheError(ProviderError):
    """Embedding cache internally inconsistent (e.g. mixed dimensions)."""


class InvalidInputError(AnosoundError):
    """An operation received data violating its contract (shape, range, finiteness)."""


class InvalidStateError(AnosoundError):
    """An operation was called before its prerequisites were established (e.g. untrained model)."""


class NumericError(AnosoundError):
    """Non-finite losses or parameters encountered during training."""
