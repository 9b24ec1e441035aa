"""
Exceptions raised by the estimation core.
"""

from typing import Optional, Sequence


class EstimationError(Exception):
    """Base class for numerical failures of the estimation core."""


class NotObservable(EstimationError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"observability matrix is singular (condition number {condition:.3e})")


class NotAModulatingFunction(EstimationError):
    """Neither boundary of the kernel vanishes."""


class WindowNotReady(EstimationError):
    """The receding horizon has not been filled yet."""


class RankDeficient(EstimationError):
    def __init__(self, rank: int, expected: int, detail: str = ""):
        self.rank = rank
        self.expected = expected
        message = f"rank {rank} < {expected}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SingularGramian(EstimationError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"information matrix is singular (condition number {condition:.3e})")


class SingularWl(EstimationError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"left modulating matrix is singular (condition number {condition:.3e})")


class UnstableObserver(EstimationError):
    def __init__(self, poles: Sequence[complex]):
        self.poles = list(poles)
        shown = ", ".join(f"{p:.4g}" for p in self.poles)
        super().__init__(f"A - LC is not Hurwitz (poles: {shown})")


class Unphysical(EstimationError):
    def __init__(self, inequality: str):
        self.inequality = inequality
        super().__init__(f"coefficients are not realizable as an RC network: {inequality} violated")


class DegenerateSignal(EstimationError):
    """The reference signal is constant."""


class ConfigError(ValueError):
    """Invalid scenario configuration, located by a dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class SchemaError(ValueError):
    """CSV content does not match the trajectory schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
