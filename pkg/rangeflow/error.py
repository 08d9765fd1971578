class Error(Exception):
    pass


class Unregistered(Error):
    """Raised when the user requests an item from a registry that does
    not actually exist.
    """
    pass


class ShapeError(Error, ValueError):
    """Raised when operand shapes do not conform to an operation's rule.
    """
    pass


class DomainError(Error, ValueError):
    """Raised when an input lies outside the domain of a primitive
    (e.g. log or sqrt of a negative value).
    """
    pass


class InvalidArgument(Error, ValueError):
    """Raised when a precondition on an argument is violated.
    """
    pass


class NumericalError(Error, ArithmeticError):
    """Raised when a computation produces non-finite values.
    """
    pass


class SolverError(NumericalError):
    """Raised when ODE integration fails. Carries the last accepted time
    and state so callers can report or resume.
    """

    def __init__(self, message, t=None, state=None):
        super(SolverError, self).__init__(message)
        self.t = t
        self.state = state


class StageError(Error):
    """Raised when a flow stage is used against its contract: broken
    lineage, or a sampling schedule that the stage does not allow.
    """
    pass


class DataError(Error):
    """Raised when input data is missing or cannot be used.
    """
    pass


class FormatError(DataError):
    """Raised when a binary artifact is malformed. The message carries the
    byte offset at which decoding failed.
    """

    def __init__(self, message, offset):
        super(FormatError, self).__init__('{} (at byte {})'.format(message, offset))
        self.offset = offset


class DigestMismatch(DataError):
    """Raised when the stored digest of an artifact does not match its content.
    """
    pass
