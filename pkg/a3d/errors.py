"""
Error types for the A3D toolkit
Each error carries the exit code the CLI reports for it
"""

from typing import Optional


class A3DError(Exception):
    """Base error for all toolkit failures"""

    exit_code = 1


class UsageError(A3DError):
    """Invalid command-line usage"""

    exit_code = 2


class ValidationError(A3DError):
    """A record or configuration violates its invariants"""

    exit_code = 3


class DataFormatError(ValidationError):
    """Malformed line in an input file"""

    def __init__(self, path: str, line_number: Optional[int], message: str):
        self.path = str(path)
        self.line_number = line_number
        location = f"{self.path}:{line_number}" if line_number is not None else self.path
        super().__init__(f"{location}: {message}")


class NumericError(A3DError):
    """Non-finite values or degenerate vectors"""

    exit_code = 4


class OrderingError(A3DError):
    """The demo's accuracy ordering did not hold"""

    exit_code = 5
