class DualAttentionError(Exception):
    """Base class for every rejection raised by the package."""


class ShapeError(DualAttentionError, ValueError):
    pass


class ConfigError(DualAttentionError, ValueError):
    pass


class DatasetFormatError(DualAttentionError, ValueError):
    """Malformed dataset, vocabulary or evaluation file (carries file:line)."""

    def __init__(self, message: str, path=None, line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        if field:
            location += f"{field}: "
        super().__init__(location + message)


class VocabularyError(DualAttentionError, ValueError):
    pass


class CheckpointError(DualAttentionError, ValueError):
    pass


class TaskMismatchError(DualAttentionError, ValueError):
    pass


class GradientError(DualAttentionError, ValueError):
    pass


class DomainError(DualAttentionError, ValueError):
    """A value outside the domain an operation is defined on."""
