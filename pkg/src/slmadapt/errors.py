"""Exception hierarchy shared by all stages.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class ToolkitError(Exception):
    exit_code = 1


class ValidationError(ToolkitError):
    """Input data, plan or config failed a contract check."""

    exit_code = 1


class DatasetFileMissing(ValidationError, FileNotFoundError):
    pass


class SchemaViolation(ValidationError):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DuplicateIdError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class BackendError(ToolkitError):
    """A generation or training backend failed."""

    exit_code = 2


class BackendTimeout(BackendError):
    pass


class PipelineError(ToolkitError):
    """A multi-stage run stopped part way; artifacts so far are kept."""

    exit_code = 3
