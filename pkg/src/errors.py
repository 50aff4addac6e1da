"""
Exception hierarchy for the cusp recovery toolkit.

Every error carries a short machine-parseable ``code`` and the exit status
the command line uses when the error reaches it.
"""

from typing import List, Optional


class CuspToolkitError(Exception):
    """Base class for all toolkit errors."""

    code = "E_TOOLKIT"
    exit_status = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def one_line(self) -> str:
        """Single-line rendering used on stderr by the CLI."""
        text = " ".join(str(self.message).split())
        return f"error={self.code} message={text}"


class ConfigurationError(CuspToolkitError, ValueError):
    """Invalid configuration, medium, grid or argument combination."""

    code = "E_CONFIG"
    exit_status = 2


class DomainError(CuspToolkitError, ValueError):
    """Special function evaluated outside its domain."""

    code = "E_DOMAIN"
    exit_status = 3


class SolverError(CuspToolkitError):
    """Krylov iteration failed to reach the requested tolerance."""

    code = "E_SOLVER"
    exit_status = 4

    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class ContractViolation(CuspToolkitError):
    """Inputs that are individually valid but inconsistent with each other."""

    code = "E_CONTRACT"
    exit_status = 5


class ReconstructionError(CuspToolkitError):
    """Corner reconstruction impossible from the detected points."""

    code = "E_RECONSTRUCT"
    exit_status = 6


class ArchiveError(CuspToolkitError):
    """Malformed or inconsistent far-field archive."""

    code = "E_ARCHIVE"
    exit_status = 7
