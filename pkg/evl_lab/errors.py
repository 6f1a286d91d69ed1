from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from evl_lab.engine import IterationRecord


class EvlLabError(Exception):
    pass


class NumericEvaluationError(EvlLabError):
    pass


class UnsupportedOperationError(EvlLabError):
    pass


class FitError(EvlLabError):
    pass


class ConvergenceError(EvlLabError):
    pass


class ArtifactError(EvlLabError):
    pass


class ComplexityError(EvlLabError, ValueError):
    pass


class DominanceError(EvlLabError, ValueError):
    pass


class EvlAborted(EvlLabError):
    """
    Raised when an iteration of the outer loop fails.
    The records of every iteration that did complete are attached as `trace`.
    """

    def __init__(self, iteration: int, trace: tuple[IterationRecord, ...], reason: str):
        super().__init__(f"Iteration {iteration} failed after {len(trace)} completed iterations: {reason}")
        self.iteration = iteration
        self.trace = trace
        self.reason = reason
