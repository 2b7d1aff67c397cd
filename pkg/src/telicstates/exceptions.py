from typing import Optional, Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from .telic_control import ReachabilityReport


class TelicError(Exception):
    """Base class for all telicstates custom exceptions."""
    pass


class DistributionError(TelicError):
    """Base class for experience, table and distribution errors."""
    pass


class UnknownHistory(DistributionError, KeyError):
    def __init__(self, prefix: str, table: str):
        super().__init__(f"Unknown history {prefix!r} in {table} table.")
        self.prefix = prefix
        self.table = table


class EnumerationTooLarge(DistributionError, ValueError):
    pass


class NoSamples(DistributionError, ValueError):
    pass


class NotNormalized(DistributionError, ValueError):
    pass


class DuplicateExperience(DistributionError, ValueError):
    pass


class InvalidTable(DistributionError, ValueError):
    pass


class UnknownSymbol(DistributionError, ValueError):
    pass


class InvalidGoal(DistributionError, ValueError):
    pass


class DivergenceError(TelicError):
    """Base class for projection and policy-gradient errors."""
    pass


class UnreachableState(DivergenceError, ArithmeticError):
    pass


class DivergentStart(DivergenceError, ArithmeticError):
    pass


class GradientOverflow(DivergenceError, ArithmeticError):
    pass


class InvalidStepSize(DivergenceError, ValueError):
    pass


class ControlError(TelicError):
    """Base class for reachability and refinement errors."""
    pass


class OptimizationFailure(ControlError, RuntimeError):
    pass


class NoSplitNeeded(ControlError, ValueError):
    pass


class BisectionFailure(ControlError, RuntimeError):
    pass


class SplitCollapsed(ControlError, ValueError):
    pass


class RefinementDidNotConverge(ControlError, RuntimeError):
    def __init__(self, message: str,
                 report: Optional["ReachabilityReport"] = None):
        super().__init__(message)
        self.report = report


class NavigationError(TelicError):
    """Base class for navigation task errors."""
    pass


class UnknownRegion(NavigationError, KeyError):
    pass


class StateNotFound(NavigationError, ValueError):
    pass


class InvalidPolicy(NavigationError, ValueError):
    pass


class InvalidTask(NavigationError, ValueError):
    pass


class SplitCollision(NavigationError, ValueError):
    pass


class ConfigError(TelicError):
    """Base class for configuration and output errors."""
    pass


class InvalidConfig(ConfigError, ValueError):
    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("Invalid configuration:\n  " +
                         "\n  ".join(self.diagnostics))
