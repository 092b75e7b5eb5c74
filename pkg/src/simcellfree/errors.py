"""Exception hierarchy. Each category carries the CLI exit code it maps to."""


class SimCellFreeError(Exception):
    exit_code = 1


class ConfigError(SimCellFreeError, ValueError):
    exit_code = 2


class GeometryError(SimCellFreeError, ValueError):
    exit_code = 3


class ConditioningError(SimCellFreeError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DegenerateChannelError(SimCellFreeError, ArithmeticError):
    """An equivalent channel has zero norm, so MRC is undefined."""

    exit_code = 5

    def __init__(self, ap, ue):
        super().__init__(f"equivalent channel of UE {ue} at AP {ap} has zero norm")
        self.ap = ap
        self.ue = ue


class ExperimentError(SimCellFreeError):
    exit_code = 6
