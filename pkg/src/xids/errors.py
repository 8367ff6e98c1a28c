"""Error taxonomy shared by the library, the service, and the CLI.

Every failure the pipeline can surface maps to one of three kinds so the
CLI can translate it into a stable exit code and the service into a
structured HTTP error body.
"""


class XidsError(Exception):
    """Base class; `kind` drives exit codes and HTTP error bodies."""

    kind = "internal"
    exit_code = 1


class UsageError(XidsError):
    """Bad arguments, malformed config, inconsistent request."""

    kind = "usage"
    exit_code = 1


class DataError(XidsError):
    """Bad input data: missing files, schema mismatch, unseen labels."""

    kind = "data"
    exit_code = 2


class DivergenceError(XidsError):
    """Training produced a non-finite loss or parameters."""

    kind = "divergence"
    exit_code = 3

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
