from typing import List, Optional


class InvalidSupportError(ValueError):
    """A recovered support cannot be mapped back to packet bits."""


class SingularSupportError(ValueError):
    """The columns selected by a support are numerically rank deficient."""


class ConfigError(ValueError):
    """
    Raised when a configuration cannot be built or violates its invariants.

    :param message: summary of the failure
    :param violations: every violated condition, one description each
    """

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        self.violations = list(violations or [])
        if self.violations:
            message = f"{message}: " + "; ".join(self.violations)
        super().__init__(message)
