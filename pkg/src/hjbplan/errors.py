"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """A caller-supplied argument violates an operation's precondition."""


class InvalidDataError(ValueError):
    """Input data (field samples, files) is structurally valid but semantically bad."""


class SolverError(RuntimeError):
    """A numerical solve could not be completed to the requested accuracy."""


class InternalError(RuntimeError):
    """A postcondition that should be unreachable was violated."""
