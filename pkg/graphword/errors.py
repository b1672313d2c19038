"""Exceptions raised by graphword

Every error carries the process exit code used by the command line
interface. Data and configuration errors subclass ``ValueError`` so callers
that only care about bad input can keep catching that.
"""


class GraphwordError(Exception):
    """Base class for all graphword errors"""
    exit_code = 1


class ConfigError(GraphwordError, ValueError):
    """Invalid configuration key or value"""
    exit_code = 2


class ParseError(GraphwordError, ValueError):
    """Malformed line in an interaction or manifest file

    Parameters
    ----------
    message : str
        Description of the problem
    lineno : int, optional
        1-based line number of the offending line. Default: None
    """
    exit_code = 3

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f'line {lineno}: {message}'
        super().__init__(message)
        self.lineno = lineno


class FormatError(GraphwordError, ValueError):
    """Bad magic, version or size in a binary file"""
    exit_code = 3


class EmptyDatasetError(GraphwordError, ValueError):
    """No user survives the split rules"""
    exit_code = 3


class InsufficientNegativesError(GraphwordError, ValueError):
    """A user has too few non-interacted items to draw negatives from"""
    exit_code = 3


class ColdEntityError(GraphwordError, KeyError):
    """An entity has no row in the whole-word table"""
    exit_code = 3

    def __str__(self):
        return str(self.args[0]) if self.args else ''


class IndexOverflowError(GraphwordError, ValueError):
    """A prompt names more IDs than an index table has rows for"""
    exit_code = 3


class EmptyOutputError(GraphwordError, ValueError):
    """Every decoded beam failed to parse as an item"""
    exit_code = 3


class NumericFault(GraphwordError, ArithmeticError):
    """Loss or parameters became NaN or infinite"""
    exit_code = 4


class TrainingFault(NumericFault):
    """Training diverged"""
    exit_code = 4
