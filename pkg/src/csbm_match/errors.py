"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`CapacityError` to exit code 3.
"""


class ValidationError(ValueError):
    """Invalid parameters or inputs."""


class CapacityError(RuntimeError):
    """A size guard (enumeration, oracle or DP budget) would be exceeded."""
