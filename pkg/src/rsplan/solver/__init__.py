"""LP/MIP core: model builder, reference simplex + branch and bound, HiGHS adapter."""

from .branch_bound import solve_mip
from .highs import SolverFailure, solve_highs
from .model import (
    BINARY,
    CONTINUOUS,
    INF,
    INFEASIBLE,
    INTEGER,
    LIMIT,
    OPTIMAL,
    UNBOUNDED,
    CompiledModel,
    LinearModel,
    LinExpr,
    ModelError,
    SolveOptions,
    SolveResult,
    VarRef,
    lin_sum,
)
from .simplex import solve_lp

BACKENDS = ("highs", "reference")


def backend_adapter(model, opts: SolveOptions | None = None) -> SolveResult:
    """Solve through the external backend; same ``SolveResult`` contract as the reference."""
    return solve_highs(model, opts)


def solve(model, opts: SolveOptions | None = None) -> SolveResult:
    """Dispatch on ``opts.backend``; LPs and MIPs alike."""
    opts = opts or SolveOptions()
    if opts.backend == "highs":
        return solve_highs(model, opts)
    if opts.backend == "reference":
        return solve_mip(model, opts)
    raise ModelError(f"unknown backend {opts.backend!r}; expected one of {BACKENDS}")


__all__ = [
    "BACKENDS", "BINARY", "CONTINUOUS", "INF", "INFEASIBLE", "INTEGER", "LIMIT", "OPTIMAL",
    "UNBOUNDED", "CompiledModel", "LinearModel", "LinExpr", "ModelError", "SolveOptions",
    "SolveResult", "SolverFailure", "VarRef", "backend_adapter", "lin_sum", "solve",
    "solve_highs", "solve_lp", "solve_mip",
]
