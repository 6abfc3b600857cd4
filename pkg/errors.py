"""
Exceptions raised by the toolkit.

Library code raises these; only main.py turns them into exit codes.
"""


class ExtremalDepError(Exception):
    """Root of every toolkit error."""
    pass


class ValidationError(ExtremalDepError, ValueError):
    """Invalid input: dimension mismatch, negative or non-finite entries, bad partitions or configs."""
    pass


class InsufficientModelDataError(ExtremalDepError):
    """
    The extremal index was requested at a point outside the model's declared domain.

    This is not an input error: the point is valid, the model just does not know theta there.
    `partial` carries whatever was computed before theta was needed.
    """

    def __init__(self, message: str, tau=None, partial=None) -> None:
        super().__init__(message)
        self.tau = tau
        self.partial = partial


class CalibrationError(ExtremalDepError):
    """A Monte Carlo probability came out degenerate (0 or 1), or there was nothing to count."""
    pass
