"""External backend: HiGHS through ``scipy.optimize.milp``."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import (
    INFEASIBLE,
    LIMIT,
    OPTIMAL,
    UNBOUNDED,
    CompiledModel,
    LinearModel,
    SolveOptions,
    SolveResult,
)


class SolverFailure(RuntimeError):
    pass


_STATUS = {0: OPTIMAL, 1: LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


def solve_highs(model: LinearModel | CompiledModel, opts: SolveOptions | None = None) -> SolveResult:
    opts = opts or SolveOptions()
    cm = model.freeze() if isinstance(model, LinearModel) else model
    options = {"presolve": True, "mip_rel_gap": opts.mip_rel_gap}
    if math.isfinite(opts.time_limit):
        options["time_limit"] = opts.time_limit
    if cm.is_mip:
        options["node_limit"] = opts.max_bnb_nodes
    cons = LinearConstraint(cm.A, cm.row_lo, cm.row_hi) if cm.n_rows else None
    res = milp(
        cm.c,
        integrality=cm.integrality,
        bounds=Bounds(cm.lb, cm.ub),
        constraints=cons,
        options=options,
    )
    status = _STATUS.get(res.status)
    if status is None:
        raise SolverFailure(f"HiGHS failed: {res.message}")
    stats = {"nodes": getattr(res, "mip_node_count", 0) or 0, "iterations": 0, "message": res.message}
    if res.x is None:
        return SolveResult(status, stats=stats)
    # HiGHS may return points a feasibility tolerance outside simple bounds; snap them back
    x = np.clip(np.asarray(res.x, dtype=float), cm.lb, cm.ub)
    if cm.is_mip:
        idx = np.flatnonzero(cm.integrality)
        x[idx] = np.round(x[idx])
    return SolveResult(status, cm.objective_value(float(cm.c @ x)), x, stats)
