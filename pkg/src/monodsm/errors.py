"""Exception types raised across the package."""


class DSMError(Exception):
    """Base class for all package errors."""


class DimensionError(DSMError, ValueError):
    """Vectors or operators with incompatible dimensions."""


class OperatorOverflowError(DSMError, ArithmeticError):
    """Operator evaluation produced a non-finite value."""


class NonFiniteInputError(DSMError, ValueError):
    """A vector with NaN or infinite components was supplied."""


class NoOracleError(DSMError, LookupError):
    """No independent minimal-norm oracle exists for the operator family.

    Distinct from an oracle that certifies the equation has no solution,
    which is reported by returning ``None``.
    """


class ScheduleError(DSMError, ValueError):
    """Invalid schedule parameters or evaluation time."""


class StepSizeUnderflowError(DSMError, RuntimeError):
    """Adaptive step size fell below the representable minimum."""


class GridError(DSMError, ValueError):
    """Peano grid incompatible with the delay, or runs on mismatched problems."""


class ConfigError(DSMError, ValueError):
    """Experiment configuration could not be parsed or validated.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        Dotted path of the offending key, e.g. ``"integrator.dt"``.
    line : int, optional
        Line number in the source file when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
