"""Exception types shared across the toolkit.

Every error carries a machine-readable ``category`` so the CLI can emit
structured failures and scripts can branch on them without parsing text.
"""


class XlftError(Exception):
    """Base error; ``category`` is a short stable identifier."""

    category = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(XlftError):
    category = "config"


class ShapeError(XlftError):
    category = "shape"


class TaxonomyError(XlftError):
    category = "taxonomy"


class ParseError(XlftError):
    """Malformed input file; reports the offending line when known."""

    category = "parse"

    def __init__(self, message: str, path=None, line: int | None = None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class CheckpointError(XlftError):
    category = "checkpoint"


class GradCheckError(XlftError):
    category = "gradcheck"
