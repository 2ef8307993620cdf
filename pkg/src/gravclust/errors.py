"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called outside its documented contract."""


class InvalidParameter(ContractViolation):
    """A parameter value is outside its valid range."""


class OrderingError(ContractViolation):
    """Input violates the required temporal ordering."""


class NotFoundError(LookupError):
    """A requested label or record does not exist."""


class FormatError(ValueError):
    """An input file could not be parsed."""
