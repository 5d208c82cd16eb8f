"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
ProviderError -> 3.
"""


class RelIclError(Exception):
    """Base class for all toolkit errors."""


class UsageError(RelIclError):
    """Bad command-line arguments or configuration."""


class DataError(RelIclError):
    """Malformed or inconsistent data: datasets, vector stores, schemas."""


class ProviderError(RelIclError):
    """An embedding or completion provider failed after retries."""


class TransientProviderError(ProviderError):
    """A provider failure worth retrying (rate limit, 5xx, connection)."""


class EmptyCompletionError(ProviderError):
    """The provider returned an empty or whitespace-only completion."""


class BudgetError(RelIclError):
    """A prompt cannot fit the token budget even with zero demonstrations."""
