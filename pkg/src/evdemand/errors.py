"""Exception hierarchy. Each family maps to one CLI exit code."""


class EvDemandError(Exception):
    code = "E_INTERNAL"
    exit_code = 1


class ConfigError(EvDemandError):
    code = "E_CONFIG"
    exit_code = 2


class DataIntegrityError(EvDemandError):
    code = "E_DATA"
    exit_code = 3


class SchemaError(DataIntegrityError):
    code = "E_SCHEMA"


class ParseError(DataIntegrityError):
    """Malformed cell in an input CSV."""

    code = "E_PARSE"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(ParseError):
    """A parsed value violates a domain bound."""

    code = "E_VALIDATION"

    def __init__(self, message, field, line=None, column=None):
        self.field = field
        super().__init__(f"{field}: {message}", line=line, column=column)


class ModelError(EvDemandError):
    code = "E_MODEL"
    exit_code = 4
