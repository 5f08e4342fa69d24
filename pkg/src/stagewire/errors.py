"""Errors shared across file readers."""


class ParseError(ValueError):
    """Bad input text. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = " ".join(p for p in (f"line {line}" if line else "", f"at {field}" if field else "") if p)
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.field = field
