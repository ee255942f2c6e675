"""Robust storage planning: model builders, second-stage evaluation, C&CG."""

from .build import MasterHandles, RecourseBlock, add_recourse, build_master, build_second_stage
from .ccg import ccg_solve, equality_tol, extensive_solve, find_essential, restricted_objective
from .operate import SecondStageEvaluator, evaluate_operation, worst_case_response
from .types import (
    ALL_KINDS,
    EssentialSet,
    FormulationKind,
    OperationOutcome,
    RobustSolution,
    RspError,
    StoragePlan,
)

__all__ = [
    "ALL_KINDS", "EssentialSet", "FormulationKind", "MasterHandles", "OperationOutcome",
    "RecourseBlock", "RobustSolution", "RspError", "SecondStageEvaluator", "StoragePlan",
    "add_recourse", "build_master", "build_second_stage", "ccg_solve", "equality_tol",
    "evaluate_operation", "extensive_solve", "find_essential", "restricted_objective",
    "worst_case_response",
]
