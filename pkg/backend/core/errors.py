"""
Error Hierarchy
===============
energy-lab 공통 예외 정의

Every failure that can reach the CLI or the HTTP API is an EnergyLabError.
Each class carries a stable machine-readable ``code`` and the CLI exit code.
"""

from datetime import datetime
from typing import Any, Dict


class EnergyLabError(Exception):
    """Base class for all domain errors."""

    code = "energy_lab_error"
    exit_code = 1
    http_status = 500

    def to_dict(self) -> Dict[str, Any]:
        """One-line error object used by the CLI and the API handlers."""
        return {
            "success": False,
            "error": self.code,
            "message": str(self),
            "exit_code": self.exit_code,
            "timestamp": datetime.now().isoformat(),
        }


class SpecError(EnergyLabError, ValueError):
    """Malformed group/model/subset spec or out-of-range parameter."""

    code = "malformed_spec"
    exit_code = 3
    http_status = 400


class UsageError(EnergyLabError, ValueError):
    """Unknown subcommand or a bad command-line argument."""

    code = "usage_error"
    exit_code = 2
    http_status = 400


class UniverseMismatchError(EnergyLabError, ValueError):
    """Two subsets (or a subset and an action) live over different universes."""

    code = "universe_mismatch"
    exit_code = 3
    http_status = 400


class CapExceededError(EnergyLabError):
    """An enumeration, closure or ball size cap would be exceeded."""

    code = "cap_exceeded"
    exit_code = 4
    http_status = 413

    def __init__(self, what: str, size: int, cap: int, hint: str = ""):
        self.what = what
        self.size = size
        self.cap = cap
        message = f"{what}: {size} exceeds cap {cap}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)


class InvariantViolation(EnergyLabError):
    """An internal self-check failed. Always a bug, never a user error."""

    code = "invariant_violation"
    exit_code = 5


class ValidationFailure(EnergyLabError):
    """The oracle battery found an exact-equality failure."""

    code = "validation_failed"
    exit_code = 6


def check(condition: bool, message: str) -> None:
    """Raise InvariantViolation unless ``condition`` holds."""
    if not condition:
        raise InvariantViolation(message)
