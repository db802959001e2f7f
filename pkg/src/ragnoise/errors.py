"""Exception types shared across the toolkit."""


class RagNoiseError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(RagNoiseError):
    """An operation received input that violates its preconditions."""


class ValidationError(RagNoiseError):
    """Data failed a structural or consistency check (duplicate ids, bad counts...)."""


class SchemaError(ValidationError):
    """A serialized record is missing required fields or has wrong types."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TableError(ValidationError):
    """A corruption table (adjacency / confusion / misspellings) violates its invariants."""


class ModelMismatchError(RagNoiseError):
    """Corpus embeddings were produced by a different model than the one searching."""


class TransportError(RagNoiseError):
    """An external endpoint could not be reached after the configured retries."""
