"""Shared exception types mapped to CLI exit codes."""


class InstanceError(Exception):
    """Base class for problems with an instance document."""


class ParseError(InstanceError):
    """The document is not syntactically valid."""


class ValidationError(InstanceError):
    """The document parsed but violates an invariant; the message names it."""


class BudgetError(Exception):
    """An enumeration or cap pre-check failed (solver/oracle budget exceeded)."""


class VerificationError(Exception):
    """An oracle check against a solver output failed."""
