"""Column-and-constraint generation over a finite scenario set, plus the
monolithic (all scenarios enumerated) form and invariant-set reduction."""

from __future__ import annotations

import logging
import math

from ..grid import NetworkCase
from ..solver import OPTIMAL, SolveOptions, SolverFailure, solve
from .build import build_master, plan_from_solution
from .operate import SecondStageEvaluator, worst_case_response
from .types import EssentialSet, FormulationKind, RobustSolution, RspError, StoragePlan

log = logging.getLogger(__name__)

DEFAULT_VAR_CAP = 400_000


def equality_tol(objective: float) -> float:
    return max(1e-6 * abs(objective), 1e-3)


def _objective(case: NetworkCase, kind: FormulationKind, plan: StoragePlan, gamma: float) -> float:
    if kind.objective == "cost":
        return plan.investment_cost(case) + case.day_weight * gamma
    return gamma


def _solve_master(case, active, kind, opts, var_cap=None):
    model, handles = build_master(case, active, kind)
    if var_cap is not None and model.n_vars > var_cap:
        raise RspError(f"model has {model.n_vars} variables, above the cap {var_cap}")
    res = solve(model, opts)
    if res.status != OPTIMAL:
        raise SolverFailure(f"master problem returned {res.status}")
    plan = plan_from_solution(res, handles)
    if plan.units is not None:
        plan = StoragePlan.from_units(case, plan.units)
    return res, plan, res[handles.gamma]


def ccg_solve(case: NetworkCase, scenarios, kind: FormulationKind, gap_tol: float = 1e-4,
              max_iter: int = 100, opts: SolveOptions | None = None, rel_gap: float = 1e-7,
              seed_index: int = 0) -> RobustSolution:
    """Alternate the master over active scenarios and a full enumeration of the rest.

    Stops once ``UB - LB <= max(gap_tol, rel_gap * |UB|)`` or the worst
    scenario for the current plan is already active. The first master sees
    only scenario ``seed_index``.
    """
    n = len(scenarios)
    if n == 0:
        raise ValueError("empty scenario set")
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    opts = opts or SolveOptions()
    evaluator = SecondStageEvaluator(case, kind, opts)
    active: list[int] = [seed_index]
    lb, ub = -math.inf, math.inf
    best_plan, best_gamma = None, math.nan
    history: list[tuple[float, float]] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        res, plan, _ = _solve_master(case, [scenarios[i] for i in active], kind, opts)
        lb = max(lb, res.objective)
        worst, wval = worst_case_response(case, plan, scenarios, kind, evaluator=evaluator)
        cand = _objective(case, kind, plan, wval)
        if cand < ub:
            ub, best_plan, best_gamma = cand, plan, wval
        history.append((lb, ub))
        log.debug("ccg iter %d: lb=%.6f ub=%.6f worst=%d active=%s", it, lb, ub, worst, active)
        if ub - lb <= max(gap_tol, rel_gap * abs(ub)) or worst in active:
            converged = True
            break
        active.append(worst)
    if not converged:
        log.warning("C&CG stopped after %d iterations with gap %.6g", max_iter, ub - lb)
    return RobustSolution(best_plan, best_gamma, ub, lb, ub, tuple(dict.fromkeys(active)), it,
                          converged, history, kind)


def extensive_solve(case: NetworkCase, scenarios, kind: FormulationKind, opts: SolveOptions | None = None,
                    var_cap: int = DEFAULT_VAR_CAP) -> RobustSolution:
    """One model holding a recourse copy for every scenario."""
    if len(scenarios) == 0:
        raise ValueError("empty scenario set")
    opts = opts or SolveOptions()
    res, plan, gamma = _solve_master(case, list(scenarios), kind, opts, var_cap)
    obj = res.objective
    return RobustSolution(plan, gamma, obj, obj, obj, tuple(range(len(scenarios))), 1, True, [(obj, obj)], kind)


def restricted_objective(case: NetworkCase, scenarios, indices, kind: FormulationKind,
                         opts: SolveOptions | None = None) -> float:
    """Optimal objective when only ``indices`` are kept."""
    res, _, _ = _solve_master(case, [scenarios[i] for i in indices], kind, opts or SolveOptions())
    return res.objective


def find_essential(case: NetworkCase, scenarios, kind: FormulationKind, critical_set, full_objective: float,
                   tol: float | None = None, opts: SolveOptions | None = None) -> EssentialSet:
    """Greedy reduction of an invariant set, removals tried in ascending index order.

    A removal is kept when the re-solved objective stays within ``tol`` of
    ``full_objective``. Dropping scenarios can only lower the optimum, so a
    scenario whose removal changed it once still changes it later: the result
    is irreducible after one pass.
    """
    tol = equality_tol(full_objective) if tol is None else tol
    current = sorted(dict.fromkeys(int(i) for i in critical_set))
    if not current:
        raise ValueError("critical set is empty")
    base = restricted_objective(case, scenarios, current, kind, opts)
    if abs(base - full_objective) > tol:
        raise RspError(
            f"critical set is not invariant: objective {base:.9g} vs full {full_objective:.9g}"
        )
    for idx in list(current):
        if len(current) == 1:
            break
        trial = [i for i in current if i != idx]
        if abs(restricted_objective(case, scenarios, trial, kind, opts) - full_objective) <= tol:
            current = trial
    return EssentialSet(tuple(current))
