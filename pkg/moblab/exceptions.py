"""
Exception hierarchy for moblab.

Every error raised on purpose by the package derives from `MoblabError`;
the value-like errors also derive from `ValueError` so callers that only
know the builtin types still catch them.
"""


class MoblabError(Exception):
    pass


class PrecisionError(MoblabError, ValueError):
    """ The stored precision of a phase cannot certify the requested result. """


class ParameterError(MoblabError, ValueError):
    """ Ill-formed numerical parameters (P >= Q, theta out of range, bad grids). """


class PlanError(ParameterError):
    """ A Vaughan plan could not be built; `failed` names the violated conditions. """

    def __init__(self, message: str, failed=None):
        super().__init__(message)
        self.failed = list(failed or [])


class ArgumentError(MoblabError, ValueError):
    """ Arguments inconsistent with each other (gcd, divisibility, coverage). """


class ResourceError(MoblabError, RuntimeError):
    """ Term budget, memory budget or wide-integer range exceeded. """


class ClassificationError(MoblabError, RuntimeError):
    """ A witness approximation satisfied none of the arc conditions. """


class ConfigError(MoblabError, ValueError):
    pass


class BaselineError(MoblabError, LookupError):
    """ No committed baseline for a regression key, and recording is off. """
