"""Second-stage evaluation under a fixed plan."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..grid import NetworkCase
from ..scenarios import DailyScenario
from ..solver import OPTIMAL, CompiledModel, SolveOptions, solve
from .build import RecourseBlock, big_m, build_second_stage, bus_loads, net_injection
from .types import FormulationKind, OperationOutcome, RspError, StoragePlan

_TIE_REL = 1e-9


def _dense(expr, n: int) -> np.ndarray:
    out = np.zeros(n)
    for k, c in expr.terms.items():
        out[k] += c
    return out


class SecondStageEvaluator:
    """Compiled daily-operation model, re-targeted per (plan, scenario) by patching arrays.

    Only variable bounds and row right-hand sides change between calls; the
    constraint matrix and costs are built once.
    """

    def __init__(self, case: NetworkCase, kind: FormulationKind, opts: SolveOptions | None = None):
        self.case = case
        self.kind = kind
        self.opts = opts or SolveOptions()
        S = len(case.storage.candidates)
        M = big_m(case)
        zero_day = DailyScenario(np.zeros((case.n_buses, case.horizon)),
                                 np.zeros((len(case.wind_farms), case.horizon)))
        placeholder = StoragePlan((M,) * S, (M,) * S)
        model, block = build_second_stage(case, placeholder, zero_day, kind)
        self.template: CompiledModel = model.freeze()
        self.block: RecourseBlock = block
        n = self.template.n_vars
        self.cost_vec = _dense(block.cost, n)
        self.shed_vec = _dense(block.shed_total, n)
        self.load_peak = np.array([ld.peak for ld in case.loads])
        self.load_bus = np.array([ld.bus for ld in case.loads], dtype=np.int64)
        self.farm_cap = np.array([wf.capacity for wf in case.wind_farms])
        self.bus_peak = bus_loads(case)
        self.big_m = M
        self.calls = 0

    def compile_for(self, plan: StoragePlan, scenario: DailyScenario) -> CompiledModel:
        case, b = self.case, self.block
        if not scenario.fits(case):
            raise ValueError("scenario dimensions do not match the case")
        S = len(case.storage.candidates)
        if len(plan.energy) != S:
            raise ValueError("plan does not match the candidate list")
        E = np.maximum(np.asarray(plan.energy, float), 0.0)
        P = np.maximum(np.asarray(plan.power, float), 0.0)
        if not self.kind.convex and np.any(P > self.big_m * (1 + 1e-12)):
            raise RspError("plan power exceeds the per-bus unit limit")
        lb = self.template.lb.copy()
        ub = self.template.ub.copy()
        row_lo = self.template.row_lo.copy()
        row_hi = self.template.row_hi.copy()
        if len(case.loads):
            ub[b.shed] = self.load_peak[:, None] * scenario.load_factor[self.load_bus]
        if len(case.wind_farms):
            ub[b.spill] = self.farm_cap[:, None] * scenario.wind_factor
        if S:
            ub[b.ch] = P[:, None]
            ub[b.dis] = P[:, None]
            ub[b.soc] = E[:, None]
            if b.soc0 is not None:
                ub[b.soc0] = E
            if b.pair_rows is not None:
                row_hi[b.pair_rows] = P[:, None]
        rhs = net_injection(case, scenario)
        row_lo[b.balance_rows] = rhs
        row_hi[b.balance_rows] = rhs
        return replace(self.template, lb=lb, ub=ub, row_lo=row_lo, row_hi=row_hi)

    def evaluate(self, plan: StoragePlan, scenario: DailyScenario, schedule: bool = True) -> OperationOutcome:
        cm = self.compile_for(plan, scenario)
        res = solve(cm, self.opts)
        self.calls += 1
        if res.status != OPTIMAL:
            # shedding and spilling keep every day feasible, so this is a bug or a solver failure
            raise RspError(f"second stage returned {res.status}")
        x = res.x
        b = self.block
        total_cost = float(self.cost_vec @ x)
        total_shed = float(self.shed_vec @ x)
        value = total_cost if self.kind.objective == "cost" else total_shed
        bal = cm.A[b.balance_rows.ravel()] @ x - cm.row_lo[b.balance_rows.ravel()]
        residual = float(np.max(np.abs(bal), initial=0.0))
        P = np.asarray(plan.power, float)
        ch, dis = x[b.ch], x[b.dis]
        both = np.minimum(ch, dis)
        simultaneous = int(np.sum((both > 1e-6 * P[:, None]) & (both > 1e-9))) if len(P) else 0
        sched = {}
        if schedule:
            sched = {
                "generation": x[b.gen], "charge": ch, "discharge": dis, "soc": x[b.soc],
                "flow": x[b.flow], "angle": x[b.theta], "shed": x[b.shed], "spill": x[b.spill],
            }
        return OperationOutcome(total_cost, total_shed, value, sched, residual, simultaneous)


def evaluate_operation(case: NetworkCase, plan: StoragePlan, scenario: DailyScenario,
                       kind: FormulationKind, opts: SolveOptions | None = None) -> OperationOutcome:
    return SecondStageEvaluator(case, kind, opts).evaluate(plan, scenario)


def worst_case_response(case: NetworkCase, plan: StoragePlan, scenarios, kind: FormulationKind,
                        opts: SolveOptions | None = None,
                        evaluator: SecondStageEvaluator | None = None) -> tuple[int, float]:
    """Scenario with the largest second-stage value; the lowest index wins ties."""
    if len(scenarios) == 0:
        raise ValueError("empty scenario set")
    ev = evaluator or SecondStageEvaluator(case, kind, opts)
    best_i, best_v = -1, -np.inf
    for i, sc in enumerate(scenarios):
        val = ev.evaluate(plan, sc, schedule=False).value
        if best_i < 0 or val > best_v + _TIE_REL * max(1.0, abs(best_v)):
            best_i, best_v = i, val
    return best_i, best_v
