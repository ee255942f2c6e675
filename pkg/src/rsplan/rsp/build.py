"""Model construction for the first stage and the daily operation recourse.

``add_recourse`` writes one day of operation into a model. The storage
ratings are either numbers (second stage under a fixed plan) or master
variables (master problem / extensive form); in the first case every
plan- and scenario-dependent number sits in a bound or a right-hand side, so a
compiled copy can be re-targeted by patching arrays only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..grid import NetworkCase
from ..scenarios import DailyScenario
from ..solver import BINARY, INF, INTEGER, LinearModel, LinExpr, VarRef
from .types import FormulationKind, StoragePlan


@dataclass
class RecourseBlock:
    """Variable and row indices of one day of operation; arrays are [entity, t]."""

    gen: np.ndarray
    ch: np.ndarray
    dis: np.ndarray
    soc: np.ndarray
    soc0: np.ndarray | None  # initial level, cyclic mode only
    v: np.ndarray | None
    flow: np.ndarray
    theta: np.ndarray
    shed: np.ndarray
    spill: np.ndarray
    balance_rows: np.ndarray  # [bus, t]
    pair_rows: np.ndarray | None  # ch + dis <= P, convex kind with fixed plan
    cost: LinExpr
    shed_total: LinExpr


def _idx(shape) -> np.ndarray:
    return np.zeros(shape, dtype=np.int64)


def bus_loads(case: NetworkCase) -> np.ndarray:
    """Peak load per bus."""
    out = np.zeros(case.n_buses)
    for ld in case.loads:
        out[ld.bus] += ld.peak
    return out


def net_injection(case: NetworkCase, scenario: DailyScenario) -> np.ndarray:
    """Load minus available wind per (bus, t): the balance right-hand side."""
    rhs = bus_loads(case)[:, None] * scenario.load_factor
    for f, wf in enumerate(case.wind_farms):
        rhs[wf.bus] -= wf.capacity * scenario.wind_factor[f]
    return rhs


def big_m(case: NetworkCase) -> float:
    return case.storage.max_power()


def add_recourse(
    m: LinearModel,
    case: NetworkCase,
    scenario: DailyScenario,
    kind: FormulationKind,
    energy,
    power,
) -> RecourseBlock:
    """Add one day of operation. ``energy``/``power`` are per-candidate numbers or variables."""
    st = case.storage
    T = case.horizon
    G, L, W = len(case.generators), len(case.lines), len(case.wind_farms)
    N, S, D = case.n_buses, len(st.candidates), len(case.loads)
    fixed = not any(isinstance(x, (VarRef, LinExpr)) for x in list(energy) + list(power))
    if fixed:
        energy = [float(e) for e in energy]
        power = [float(p) for p in power]

    gen, flow, theta = _idx((G, T)), _idx((L, T)), _idx((N, T))
    ch, dis, soc = _idx((S, T)), _idx((S, T)), _idx((S, T))
    shed, spill = _idx((D, T)), _idx((W, T))
    v = _idx((S, T)) if not kind.convex else None
    soc0 = _idx(S) if kind.cyclic_soc else None
    pair_rows = _idx((S, T)) if (kind.convex and fixed) else None
    balance_rows = _idx((N, T))

    for t in range(T):
        for i, g in enumerate(case.generators):
            gen[i, t] = m.add_var(g.p_min, g.p_max).index
        for n in range(N):
            lo, hi = (0.0, 0.0) if n == case.slack_bus else (-INF, INF)
            theta[n, t] = m.add_var(lo, hi).index
        for j, ln in enumerate(case.lines):
            flow[j, t] = m.add_var(ln.flow_min, ln.flow_max).index
        for j, ld in enumerate(case.loads):
            shed[j, t] = m.add_var(0.0, ld.peak * scenario.load_factor[ld.bus, t]).index
        for f, wf in enumerate(case.wind_farms):
            spill[f, t] = m.add_var(0.0, wf.capacity * scenario.wind_factor[f, t]).index
        for s in range(S):
            cap_p = power[s] if fixed else INF
            cap_e = energy[s] if fixed else INF
            ch[s, t] = m.add_var(0.0, cap_p).index
            dis[s, t] = m.add_var(0.0, cap_p).index
            soc[s, t] = m.add_var(0.0, cap_e).index
            if v is not None:
                v[s, t] = m.add_var(kind=BINARY).index
    if soc0 is not None:
        for s in range(S):
            soc0[s] = m.add_var(0.0, energy[s] if fixed else INF).index

    rhs = net_injection(case, scenario)
    cand_at = {b: s for s, b in enumerate(st.candidates)}
    for t in range(T):
        # DC flow definition: flow = (theta_o - theta_r) / x
        for j, ln in enumerate(case.lines):
            b = 1.0 / ln.reactance
            m.add_range({int(flow[j, t]): 1.0, int(theta[ln.from_bus, t]): -b, int(theta[ln.to_bus, t]): b}, 0.0, 0.0)
        for n in range(N):
            terms: dict[int, float] = {}
            for i, g in enumerate(case.generators):
                if g.bus == n:
                    terms[int(gen[i, t])] = 1.0
            for j, ln in enumerate(case.lines):
                if ln.to_bus == n:
                    terms[int(flow[j, t])] = terms.get(int(flow[j, t]), 0.0) + 1.0
                if ln.from_bus == n:
                    terms[int(flow[j, t])] = terms.get(int(flow[j, t]), 0.0) - 1.0
            for j, ld in enumerate(case.loads):
                if ld.bus == n:
                    terms[int(shed[j, t])] = 1.0
            for f, wf in enumerate(case.wind_farms):
                if wf.bus == n:
                    terms[int(spill[f, t])] = -1.0
            s = cand_at.get(n)
            if s is not None:
                terms[int(dis[s, t])] = 1.0
                terms[int(ch[s, t])] = -1.0
            balance_rows[n, t] = m.add_range(terms, rhs[n, t], rhs[n, t])
        if t > 0:
            for i, g in enumerate(case.generators):
                m.add_range({int(gen[i, t]): 1.0, int(gen[i, t - 1]): -1.0}, -g.ramp_down, g.ramp_up)
        for s in range(S):
            terms = {int(soc[s, t]): 1.0, int(ch[s, t]): -st.eta_ch, int(dis[s, t]): 1.0 / st.eta_dis}
            if t > 0:
                terms[int(soc[s, t - 1])] = -1.0
            elif soc0 is not None:
                terms[int(soc0[s])] = -1.0
            m.add_range(terms, 0.0, 0.0)
            _add_storage_caps(m, kind, fixed, s, t, ch, dis, soc, v, energy, power, pair_rows, big_m(case))
    if soc0 is not None:
        for s in range(S):
            m.add_range({int(soc[s, T - 1]): 1.0, int(soc0[s]): -1.0}, 0.0, 0.0)
            if not fixed:
                m.add_constr(LinExpr({int(soc0[s]): 1.0}) - energy[s], "<=", 0.0)

    cost = LinExpr()
    for t in range(T):
        for i, g in enumerate(case.generators):
            cost.add_term(int(gen[i, t]), g.marginal_cost)
        for s in range(S):
            cost.add_term(int(ch[s, t]), st.marginal_charge)
            cost.add_term(int(dis[s, t]), st.marginal_discharge)
        for j, ld in enumerate(case.loads):
            cost.add_term(int(shed[j, t]), ld.shed_cost)
    shed_total = LinExpr({int(k): 1.0 for k in shed.ravel()})
    return RecourseBlock(gen, ch, dis, soc, soc0, v, flow, theta, shed, spill, balance_rows, pair_rows, cost, shed_total)


def _add_storage_caps(m, kind, fixed, s, t, ch, dis, soc, v, energy, power, pair_rows, M) -> None:
    c, d = int(ch[s, t]), int(dis[s, t])
    if fixed:
        if kind.convex:
            pair_rows[s, t] = m.add_range({c: 1.0, d: 1.0}, -INF, power[s])
        else:
            # ch <= M v, dis <= M (1 - v); the ratings themselves are bounds
            m.add_range({c: 1.0, int(v[s, t]): -M}, -INF, 0.0)
            m.add_range({d: 1.0, int(v[s, t]): M}, -INF, M)
        return
    P, E = power[s], energy[s]
    m.add_constr(LinExpr({int(soc[s, t]): 1.0}) - E, "<=", 0.0)
    if kind.convex:
        # exact projection of ch <= P v, dis <= P (1 - v) over v in [0, 1]
        m.add_constr(LinExpr({c: 1.0, d: 1.0}) - P, "<=", 0.0)
    else:
        m.add_constr(LinExpr({c: 1.0}) - P, "<=", 0.0)
        m.add_constr(LinExpr({d: 1.0}) - P, "<=", 0.0)
        m.add_range({c: 1.0, int(v[s, t]): -M}, -INF, 0.0)
        m.add_range({d: 1.0, int(v[s, t]): M}, -INF, M)


def second_stage_objective(block: RecourseBlock, kind: FormulationKind) -> LinExpr:
    return block.cost if kind.objective == "cost" else block.shed_total


def build_second_stage(case: NetworkCase, plan: StoragePlan, scenario: DailyScenario,
                       kind: FormulationKind) -> tuple[LinearModel, RecourseBlock]:
    if not scenario.fits(case):
        raise ValueError("scenario dimensions do not match the case")
    if len(plan.energy) != len(case.storage.candidates):
        raise ValueError("plan does not match the candidate list")
    m = LinearModel("second_stage")
    block = add_recourse(m, case, scenario, kind, [max(e, 0.0) for e in plan.energy],
                         [max(p, 0.0) for p in plan.power])
    m.set_objective(second_stage_objective(block, kind))
    return m, block


@dataclass
class MasterHandles:
    energy: list[VarRef]
    power: list[VarRef]
    units: list[VarRef] | None
    gamma: VarRef
    blocks: list[RecourseBlock]


def build_master(case: NetworkCase, active, kind: FormulationKind) -> tuple[LinearModel, MasterHandles]:
    """First stage plus one recourse copy per active scenario, linked through ``gamma``."""
    active = list(active)
    if not active:
        raise ValueError("need at least one active scenario")
    st = case.storage
    m = LinearModel("master")
    S = len(st.candidates)
    energy = [m.add_var(0.0, INF, name=f"E_{b}") for b in st.candidates]
    power = [m.add_var(0.0, INF, name=f"P_{b}") for b in st.candidates]
    units = None
    if kind.convex:
        for s in range(S):
            m.add_constr(power[s] - st.rho_min * energy[s], ">=", 0.0)
            m.add_constr(power[s] - st.rho_max * energy[s], "<=", 0.0)
    else:
        units = [m.add_var(0, st.max_units_per_bus, kind=INTEGER, name=f"z_{b}") for b in st.candidates]
        for s in range(S):
            m.add_constr(energy[s] - st.unit_energy * units[s], "==", 0.0)
            m.add_constr(power[s] - st.unit_power * units[s], "==", 0.0)
        if S:
            m.add_range({u.index: 1.0 for u in units}, -INF, st.max_units_total)
    investment = LinExpr()
    for s in range(S):
        investment.add_term(energy[s], st.cost_energy_annual)
        investment.add_term(power[s], st.cost_power_annual)
    if math.isfinite(st.budget) and S:
        m.add_constr(investment, "<=", st.budget)
    gamma = m.add_var(0.0, INF, name="gamma")
    blocks = []
    for sc in active:
        blk = add_recourse(m, case, sc, kind, energy, power)
        m.add_constr(second_stage_objective(blk, kind) - gamma, "<=", 0.0)
        blocks.append(blk)
    if kind.objective == "cost":
        m.set_objective(investment + case.day_weight * gamma)
    else:
        m.set_objective(LinExpr() + gamma)
    return m, MasterHandles(energy, power, units, gamma, blocks)


def plan_from_solution(res, handles: MasterHandles) -> StoragePlan:
    # clip solver noise below zero; "+ 0.0" turns -0.0 into 0.0
    energy = tuple(max(res[e], 0.0) + 0.0 for e in handles.energy)
    power = tuple(max(res[p], 0.0) + 0.0 for p in handles.power)
    units = None
    if handles.units is not None:
        units = tuple(int(round(res[u])) for u in handles.units)
    return StoragePlan(energy, power, units)
