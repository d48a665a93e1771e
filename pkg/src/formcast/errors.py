"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violated a documented precondition."""


class PackageParseError(ValidationError):
    """A vision package line or datagram could not be decoded."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DatagramSizeError(ValidationError):
    pass


class TableFormatError(ValidationError):
    """A transition table file is corrupt or does not match the grid."""
