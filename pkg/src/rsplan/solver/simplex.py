"""Reference LP solver: dense bounded-variable revised simplex.

Rows are handled through slack columns, ``A x - s = 0`` with
``row_lo <= s <= row_hi``, so every bound lives on a column. Phase 1 adds one
artificial per row that the starting point leaves infeasible and minimises
their sum; phase 2 fixes the artificials at zero and optimises ``c``.

Pricing is Dantzig (largest reduced cost) until ``5 * (rows + cols)``
iterations have passed in a phase, then Bland's rule. Ties always go to the
lowest column index, so identical inputs give identical pivots.
"""

from __future__ import annotations

import math
import time

import numpy as np

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

_LOWER, _UPPER, _FREE, _BASIC = 0, 1, 2, 3
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64


class _Tableau:
    def __init__(self, cm: CompiledModel, lb: np.ndarray, ub: np.ndarray, opts: SolveOptions):
        self.opts = opts
        A = cm.A.toarray()
        m, n = A.shape
        self.m, self.n = m, n
        x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        act = A @ x
        slack_basic = (act >= cm.row_lo - 1e-12) & (act <= cm.row_hi + 1e-12)
        s_val = np.clip(act, cm.row_lo, cm.row_hi)
        resid = act - s_val
        sigma = np.where(resid > 0, -1.0, 1.0)
        # columns: [x | s | a]
        self.M = np.hstack([A, -np.eye(m), np.diag(sigma)])
        self.lo = np.concatenate([lb, cm.row_lo, np.zeros(m)])
        self.hi = np.concatenate([ub, cm.row_hi, np.where(slack_basic, 0.0, math.inf)])
        self.val = np.concatenate([x, s_val, np.abs(resid)])
        self.state = np.empty(n + 2 * m, dtype=np.int8)
        for j in range(n + 2 * m):
            self.state[j] = self._rest_state(j)
        # a nonbasic slack clipped to its upper bound must be marked as such
        self.state[n + np.flatnonzero(resid > 0)] = _UPPER
        self.basis = np.where(slack_basic, n + np.arange(m), n + m + np.arange(m))
        self.state[self.basis] = _BASIC
        self.val[n + np.arange(m)[slack_basic]] = act[slack_basic]
        self.val[n + m + np.arange(m)[slack_basic]] = 0.0
        diag = np.where(slack_basic, -1.0, sigma)
        self.Binv = np.diag(1.0 / diag) if m else np.zeros((0, 0))
        self.iterations = 0
        self.y = np.zeros(m)

    def _rest_state(self, j: int) -> int:
        if math.isfinite(self.lo[j]):
            return _LOWER
        if math.isfinite(self.hi[j]):
            return _UPPER
        return _FREE

    def refactor(self) -> None:
        if self.m == 0:
            return
        B = self.M[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nonbasic = self.state != _BASIC
        rhs = -self.M[:, nonbasic] @ self.val[nonbasic]
        self.val[self.basis] = self.Binv @ rhs

    def run(self, cost: np.ndarray, deadline: float) -> str:
        """Optimise ``cost`` from the current basis. Returns a status string."""
        opts = self.opts
        ncols = self.M.shape[1]
        bland_after = 5 * (self.m + ncols)
        phase_iters = 0
        since_refactor = 0
        movable = self.hi - self.lo > 0
        while True:
            if self.iterations >= opts.max_simplex_iters or time.monotonic() > deadline:
                return LIMIT
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            cb = cost[self.basis]
            self.y = cb @ self.Binv if self.m else np.zeros(0)
            d = cost - self.y @ self.M if self.m else cost.copy()
            st = self.state
            tol = opts.opt_tol
            inc = (st == _LOWER) & (d < -tol)
            dec = (st == _UPPER) & (d > tol)
            fre = (st == _FREE) & (np.abs(d) > tol)
            elig = (inc | dec | fre) & movable
            if not elig.any():
                return OPTIMAL
            if phase_iters >= bland_after:
                j = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if (inc[j] or (fre[j] and d[j] < 0)) else -1.0

            alpha = self.Binv @ self.M[:, j] if self.m else np.zeros(0)
            delta = -direction * alpha  # change of basic values per unit step
            xb = self.val[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            ratios = np.full(self.m, math.inf)
            dn = delta < -_PIVOT_TOL
            up = delta > _PIVOT_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios[dn] = (xb[dn] - lob[dn]) / (-delta[dn])
                ratios[up] = (hib[up] - xb[up]) / delta[up]
            ratios = np.where(np.isnan(ratios), math.inf, np.maximum(ratios, 0.0))
            t_flip = self.hi[j] - self.lo[j]
            t_row = ratios.min() if self.m else math.inf
            if not math.isfinite(t_row) and not math.isfinite(t_flip):
                return UNBOUNDED

            self.iterations += 1
            phase_iters += 1
            since_refactor += 1
            if t_flip <= t_row:
                t = t_flip
                self.val[self.basis] = xb + t * delta
                self.val[j] += direction * t
                st[j] = _UPPER if direction > 0 else _LOWER
                continue

            t = t_row
            ties = np.flatnonzero(ratios <= t_row + 1e-12)
            r = int(ties[np.argmin(self.basis[ties])])
            leaving = int(self.basis[r])
            self.val[self.basis] = xb + t * delta
            self.val[j] += direction * t
            if delta[r] < 0:
                self.val[leaving] = self.lo[leaving]
                st[leaving] = _LOWER
            else:
                self.val[leaving] = self.hi[leaving]
                st[leaving] = _UPPER
            if not math.isfinite(self.val[leaving]):  # free basic var cannot block; defensive
                self.val[leaving] = 0.0
                st[leaving] = _FREE
            st[j] = _BASIC
            self.basis[r] = j
            piv = alpha[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row_r)
            self.Binv[r] = row_r

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        self.y = cost[self.basis] @ self.Binv if self.m else np.zeros(0)
        return cost - self.y @ self.M if self.m else cost.copy()


def _lagrangian_bound(d: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """Dual bound sum_j min(d_j lo_j, d_j hi_j); valid for any multipliers."""
    total = 0.0
    for dj, l, h in zip(d, lo, hi):
        if abs(dj) <= 1e-11:
            continue
        b = l if dj > 0 else h
        if not math.isfinite(b):
            return -math.inf
        total += dj * b
    return total


def solve_lp(
    model: LinearModel | CompiledModel,
    opts: SolveOptions | None = None,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    relax: bool = False,
) -> SolveResult:
    """Solve a continuous LP with the reference simplex.

    ``lb``/``ub`` override the model's variable bounds (used by branch and bound,
    which also passes ``relax=True`` to ignore integrality).
    """
    opts = opts or SolveOptions()
    cm = model.freeze() if isinstance(model, LinearModel) else model
    if cm.is_mip and not relax:
        raise ValueError("solve_lp called on a model with integer variables; use solve_mip")
    lb = cm.lb if lb is None else lb
    ub = cm.ub if ub is None else ub
    t0 = time.monotonic()
    deadline = t0 + opts.time_limit if math.isfinite(opts.time_limit) else math.inf
    if np.any(lb > ub + opts.feas_tol):
        return SolveResult(INFEASIBLE, stats={"iterations": 0, "nodes": 0})

    tab = _Tableau(cm, lb.astype(float), ub.astype(float), opts)
    n, m = tab.n, tab.m
    ncols = n + 2 * m

    cost1 = np.zeros(ncols)
    cost1[n + m:] = 1.0
    status = tab.run(cost1, deadline)
    p1_iters = tab.iterations
    if status == LIMIT:
        return SolveResult(LIMIT, stats={"iterations": tab.iterations, "nodes": 0})
    tab.refactor()
    infeas = float(np.sum(tab.val[n + m:]))
    scale = 1.0 + float(np.max(np.abs(cm.row_lo[np.isfinite(cm.row_lo)]), initial=0.0)) + float(
        np.max(np.abs(cm.row_hi[np.isfinite(cm.row_hi)]), initial=0.0)
    )
    if infeas > opts.feas_tol * scale:
        return SolveResult(
            INFEASIBLE,
            stats={"iterations": tab.iterations, "nodes": 0, "farkas": tab.y.copy(), "phase1_infeasibility": infeas},
        )

    tab.hi[n + m:] = 0.0
    tab.val[n + m:] = np.where(tab.state[n + m:] == _BASIC, tab.val[n + m:], 0.0)
    for j in range(n + m, ncols):
        if tab.state[j] != _BASIC:
            tab.state[j] = _LOWER
    cost2 = np.concatenate([cm.c, np.zeros(2 * m)])
    status = tab.run(cost2, deadline)
    stats = {"iterations": tab.iterations, "phase1_iterations": p1_iters, "nodes": 0}
    if status != OPTIMAL:
        return SolveResult(status, stats=stats)
    tab.refactor()
    x = tab.val[:n].copy()
    x = np.clip(x, lb, ub)
    obj_min = float(cm.c @ x)
    d = tab.reduced_costs(cost2)
    # for max models this is an upper bound in the user's sense
    stats["dual_bound"] = cm.objective_value(_lagrangian_bound(d, tab.lo, tab.hi))
    stats["primal_infeasibility"] = cm.max_violation(x)
    st = tab.state
    movable = tab.hi - tab.lo > 0
    dual_infeas = np.concatenate([
        -d[(st == _LOWER) & movable], d[(st == _UPPER) & movable], np.abs(d[st == _FREE]), [0.0]
    ])
    stats["max_dual_infeasibility"] = float(dual_infeas.max())
    return SolveResult(OPTIMAL, cm.objective_value(obj_min), x, stats)
