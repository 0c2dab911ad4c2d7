"""Unit commitment solved by reduction to SAT and linear-search optimisation."""

from .model import (
    InstanceError,
    RampParams,
    Schedule,
    UcInstance,
    UnitParams,
    evaluate_exact,
    format_instance,
    parse_instance,
    read_instance,
    validate_solution,
)
from .optimizer import OptimizationResult, ResultStatus, decode, make_backend, solve_optimal
from .oracle import oracle_solve
from .reduction import EncodedProblem, ReduceOptions, reduce

__version__ = "0.1.0"

__all__ = [
    "EncodedProblem",
    "InstanceError",
    "OptimizationResult",
    "RampParams",
    "ReduceOptions",
    "ResultStatus",
    "Schedule",
    "UcInstance",
    "UnitParams",
    "decode",
    "evaluate_exact",
    "format_instance",
    "make_backend",
    "oracle_solve",
    "parse_instance",
    "read_instance",
    "reduce",
    "solve_optimal",
    "validate_solution",
]
