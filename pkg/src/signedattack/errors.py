"""Exception types shared across the toolkit."""


class SignedAttackError(Exception):
    """Base class for all toolkit errors."""


class ParseError(SignedAttackError):
    """Malformed edge-list row; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingEdgeError(SignedAttackError):
    """An operation referenced a node pair that is not an edge."""


class InvalidSplitError(SignedAttackError):
    """Train/test split fraction leaves one side empty."""


class MetricUndefinedError(SignedAttackError):
    """A metric (balance ratio, polarization, AUC) has no defined value."""


class NumericError(SignedAttackError):
    """A numerical routine failed to converge or produced non-finite values."""


class ConfigError(SignedAttackError):
    """Invalid experiment configuration."""
