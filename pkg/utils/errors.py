"""
Error types shared by the models, pipelines and the command line.

Every error carries the process exit status it maps to, so the CLI never has to
guess: 1 for bad input, 2 for resource or numeric limits, 3 for lemma failures.
"""

from typing import Any, Dict, List, Optional


class TorusCoverError(Exception):
    """Base class for all errors raised on purpose by this package"""

    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def diagnostic(self) -> str:
        """Single-line diagnostic for stderr"""
        text = str(self).replace('\n', ' ')
        if self.key:
            return f"{type(self).__name__} [{self.key}]: {text}"
        return f"{type(self).__name__}: {text}"


class InputError(TorusCoverError):
    exit_code = 1


class NotIsotropicError(InputError):
    """Raised for bodies whose volume-normalized second moments differ per axis"""

    def __init__(self, message: str, axis_moments: List[float]):
        super().__init__(f"{message}; per-axis moments: {axis_moments}")
        self.axis_moments = list(axis_moments)


class ResourceError(TorusCoverError):
    exit_code = 2


class NumericError(TorusCoverError):
    exit_code = 2

    def __init__(self, message: str, achieved_tolerance: Optional[float] = None):
        if achieved_tolerance is not None:
            message = f"{message} (achieved tolerance {achieved_tolerance:.3e})"
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class LemmaFailure(TorusCoverError):
    exit_code = 3

    def __init__(self, message: str, rows: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message)
        self.rows = rows or []


def exit_code_for(error: BaseException) -> int:
    """Map any exception to the CLI exit-status contract"""
    if isinstance(error, TorusCoverError):
        return error.exit_code
    return 1
