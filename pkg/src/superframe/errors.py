__all__ = ["SuperframeError", "DataError", "FormatError", "ProtocolError"]


class SuperframeError(Exception):
    """Base class for errors raised by ``superframe`` outside argument checks."""

    category = "runtime"


class DataError(SuperframeError):
    """A file or directory is missing, empty, or cannot be decoded."""

    category = "data"

    def __init__(self, message: str, path: object | None = None):
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
        self.path = path


class FormatError(DataError):
    """Inputs decode but violate a format contract (e.g. mixed frame sizes)."""

    category = "format"


class ProtocolError(DataError, ValueError):
    """Clips that cannot be evaluated under the metric protocol."""
