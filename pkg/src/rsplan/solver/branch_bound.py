"""Reference MIP solver: best-bound branch and bound over the reference simplex."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import replace

import numpy as np

from .model import (
    INFEASIBLE,
    LIMIT,
    OPTIMAL,
    CompiledModel,
    LinearModel,
    SolveOptions,
    SolveResult,
)
from .simplex import solve_lp


def _most_fractional(x: np.ndarray, int_idx: np.ndarray, tol: float) -> int:
    frac = np.abs(x[int_idx] - np.round(x[int_idx]))
    if frac.max(initial=0.0) <= tol:
        return -1
    # closeness to 0.5; argmin picks the lowest index among ties
    dist = np.where(frac > tol, np.abs(frac - 0.5), math.inf)
    return int(int_idx[np.argmin(dist)])


def solve_mip(model: LinearModel | CompiledModel, opts: SolveOptions | None = None) -> SolveResult:
    """Best-bound branch and bound; branches on the most fractional integer variable.

    ``stats["bound_history"]`` records the global lower bound (minimisation
    sense) each time a node is expanded; it is nondecreasing by construction.
    """
    opts = opts or SolveOptions()
    cm = model.freeze() if isinstance(model, LinearModel) else model
    if not cm.is_mip:
        return solve_lp(cm, opts)
    t0 = time.monotonic()
    int_idx = np.flatnonzero(cm.integrality)
    lb0 = cm.lb.copy()
    ub0 = cm.ub.copy()
    lb0[int_idx] = np.ceil(lb0[int_idx] - opts.int_tol)
    ub0[int_idx] = np.floor(ub0[int_idx] + opts.int_tol)
    sign = -1.0 if cm.maximize else 1.0

    def relax(lb, ub) -> SolveResult:
        remaining = opts.time_limit - (time.monotonic() - t0)
        sub = opts if not math.isfinite(opts.time_limit) else _with_time(opts, max(remaining, 0.0))
        return solve_lp(cm, sub, lb=lb, ub=ub, relax=True)

    total_iters = 0
    root = relax(lb0, ub0)
    total_iters += root.stats.get("iterations", 0)
    if root.status != OPTIMAL:
        root.stats.update(nodes=1, iterations=total_iters)
        return root

    inc_val = math.inf  # minimisation sense
    inc_x: np.ndarray | None = None
    heap: list = []
    counter = 0
    nodes = 0
    history: list[float] = []
    global_lb = -math.inf

    def consider(res: SolveResult, lb, ub, parent_bound: float) -> None:
        nonlocal inc_val, inc_x, counter
        if res.status != OPTIMAL:
            return
        bound = max(sign * res.objective, parent_bound)
        if bound >= inc_val - _prune_gap(inc_val, opts):
            return
        j = _most_fractional(res.x, int_idx, opts.int_tol)
        if j < 0:
            inc_val, inc_x = bound, res.x.copy()
            return
        counter += 1
        heapq.heappush(heap, (bound, counter, lb, ub, res.x, j))

    consider(root, lb0, ub0, -math.inf)
    status = OPTIMAL
    while heap:
        bound, _, lb, ub, x, j = heapq.heappop(heap)
        if bound >= inc_val - _prune_gap(inc_val, opts):
            heap.clear()
            break
        global_lb = max(global_lb, bound)
        history.append(global_lb)
        nodes += 1
        if nodes > opts.max_bnb_nodes or time.monotonic() - t0 > opts.time_limit:
            status = LIMIT
            break
        v = x[j]
        ub_dn = ub.copy()
        ub_dn[j] = math.floor(v)
        lb_up = lb.copy()
        lb_up[j] = math.ceil(v)
        for clb, cub in ((lb, ub_dn), (lb_up, ub)):
            res = relax(clb, cub)
            total_iters += res.stats.get("iterations", 0)
            if res.status == LIMIT:
                status = LIMIT
            consider(res, clb, cub, bound)
        if status == LIMIT:
            break

    stats = {"nodes": max(nodes, 1), "iterations": total_iters, "bound_history": history}
    if inc_x is None:
        if status == LIMIT:
            return SolveResult(LIMIT, stats=stats)
        return SolveResult(INFEASIBLE, stats=stats)
    x = inc_x.copy()
    x[int_idx] = np.round(x[int_idx])
    best = heap[0][0] if (status == LIMIT and heap) else inc_val
    stats["best_bound"] = sign * best
    return SolveResult(status, cm.objective_value(float(cm.c @ x)), x, stats)


def _prune_gap(inc_val: float, opts: SolveOptions) -> float:
    if not math.isfinite(inc_val):
        return 0.0
    return opts.opt_tol * max(1.0, abs(inc_val))


def _with_time(opts: SolveOptions, limit: float) -> SolveOptions:
    return replace(opts, time_limit=limit)

