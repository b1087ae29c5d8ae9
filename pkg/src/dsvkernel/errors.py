"""Exception hierarchy shared by all modules.

Every error raised on a validated code path derives from DsvKernelError so
the CLI can map failures to stable exit codes.
"""


class DsvKernelError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InvalidInputError(DsvKernelError):
    """A value is outside its documented domain (non-finite, wrong sign, ...)."""


class InvalidDimensionError(DsvKernelError):
    """Array shapes or basis cutoffs do not line up."""


class CutoffExceededError(DsvKernelError):
    """Requested operator parameters would push significant amplitude past the
    basis cutoff; results would be silently wrong, so we refuse instead."""


class DegenerateLabelsError(DsvKernelError):
    """A training set or split has too few classes or class members."""


class DatasetParseError(DsvKernelError):
    """A CSV file exists but its content cannot be interpreted.  Messages
    carry row/column context."""


class NonConvergenceError(DsvKernelError):
    """Optimization stopped before reaching its tolerance."""

    exit_code = 3
