"""Exception hierarchy.

Every error carries a stable ``code`` string that the CLI prints, and an
``exit_code`` (1 for validation problems, 2 for I/O problems).
"""

from __future__ import annotations


class LfmError(Exception):
    code = "LFM_ERROR"
    exit_code = 1


class ValidationError(LfmError, ValueError):
    code = "VALIDATION"


class EmptyDataset(ValidationError):
    code = "EMPTY_DATASET"


class ZeroEvidence(ValidationError):
    code = "ZERO_EVIDENCE"


class InvalidNetwork(ValidationError):
    code = "INVALID_NETWORK"


class LengthMismatch(ValidationError):
    code = "LENGTH_MISMATCH"


class EmptyMatrix(ValidationError):
    code = "EMPTY_MATRIX"


class InvalidConfig(ValidationError):
    code = "INVALID_CONFIG"

    def __init__(self, field: str, message: str = "invalid value"):
        self.field = field
        super().__init__(f"{field}: {message}")


class MalformedRow(ValidationError):
    code = "MALFORMED_ROW"

    def __init__(self, line_no: int, message: str = "malformed row"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class InvalidDirection(MalformedRow):
    code = "INVALID_DIRECTION"


class StoreIo(LfmError, OSError):
    code = "STORE_IO"
    exit_code = 2

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
