"""Exception hierarchy.

Every error carries ``where``, the ``module.operation`` that raised it, and
maps onto one CLI exit code.
"""


class SingularEMError(Exception):
    exit_code = 2

    def __init__(self, where: str, message: str):
        self.where = where
        self.message = message
        super().__init__(f"{where}: {message}")


class ConfigurationError(SingularEMError, ValueError):
    exit_code = 2


class CouplingError(ConfigurationError):
    """A coarse grid does not nest inside the fine grid."""


class AssumptionViolation(ConfigurationError):
    """Inputs fall outside the admissible parameter class."""


class DomainError(ConfigurationError):
    pass


class UnsupportedDimensionError(ConfigurationError):
    pass


class NumericalError(SingularEMError, ArithmeticError):
    exit_code = 3

    def __init__(self, where: str, message: str, *, path_index=None, step_index=None):
        self.path_index = path_index
        self.step_index = step_index
        extra = []
        if path_index is not None:
            extra.append(f"path={path_index}")
        if step_index is not None:
            extra.append(f"step={step_index}")
        if extra:
            message = f"{message} ({', '.join(extra)})"
        super().__init__(where, message)


class RangeError(NumericalError):
    """A constant overflowed the representable range."""
