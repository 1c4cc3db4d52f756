# loom_main/errors.py
from __future__ import annotations

from typing import List, Optional, Sequence


class LoomError(Exception):
    """Base class for every error the model engine raises on purpose."""


class ModelInputError(LoomError, ValueError):
    pass


class ConflictError(LoomError):
    pass


class NotFoundError(LoomError, LookupError):
    pass


class DanglingReferenceError(LoomError):
    def __init__(self, message: str, missing: Sequence[str] = ()):
        super().__init__(message)
        self.missing: List[str] = list(missing)


class ConstraintError(LoomError):
    pass


class ReferencedError(LoomError):
    """Refuse-mode removal hit an element that edges or views still point at."""

    def __init__(self, element_id: str, referrers: Sequence[str]):
        self.element_id = element_id
        self.referrers: List[str] = sorted(referrers)
        super().__init__(f"{element_id} is referenced by: {', '.join(self.referrers)}")


class ModelParseError(LoomError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class SchemaVersionError(LoomError):
    pass


class AmbiguityError(LoomError):
    def __init__(self, match_key: str, first: str, second: str):
        self.match_key = match_key
        self.element_ids = (first, second)
        super().__init__(f"match_key {match_key!r} declared by both {first} and {second}")


class ChangeSetError(LoomError):
    def __init__(self, op_index: int, reason: str):
        self.op_index = op_index
        self.reason = reason
        super().__init__(f"change #{op_index} rejected: {reason}")
