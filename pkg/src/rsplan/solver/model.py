"""Backend-neutral linear / mixed-integer model building."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
_KINDS = (CONTINUOUS, INTEGER, BINARY)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"


class ModelError(ValueError):
    pass


class VarRef:
    """Handle to one model variable. Supports ``+ - *`` to build ``LinExpr``s."""

    __slots__ = ("index", "lo", "hi", "kind", "name")

    def __init__(self, index: int, lo: float, hi: float, kind: str, name: str):
        self.index = index
        self.lo = lo
        self.hi = hi
        self.kind = kind
        self.name = name

    def __repr__(self) -> str:
        return f"VarRef({self.index}, {self.name!r})"

    def __hash__(self) -> int:
        return hash(self.index)

    def __eq__(self, other) -> bool:
        return isinstance(other, VarRef) and other.index == self.index

    def expr(self) -> "LinExpr":
        return LinExpr({self.index: 1.0})

    def __add__(self, other):
        return self.expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self.expr() - other

    def __rsub__(self, other):
        return (-1.0) * self.expr() + other

    def __mul__(self, k):
        return LinExpr({self.index: float(k)})

    __rmul__ = __mul__

    def __truediv__(self, k):
        return LinExpr({self.index: 1.0 / float(k)})

    def __neg__(self):
        return LinExpr({self.index: -1.0})


class LinExpr:
    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add_term(self, var: VarRef | int, coef: float) -> "LinExpr":
        """In-place ``self += coef * var``."""
        i = var.index if isinstance(var, VarRef) else int(var)
        self.terms[i] = self.terms.get(i, 0.0) + float(coef)
        return self

    def _iadd(self, other, sign: float) -> "LinExpr":
        if isinstance(other, LinExpr):
            for i, c in other.terms.items():
                self.terms[i] = self.terms.get(i, 0.0) + sign * c
            self.const += sign * other.const
        elif isinstance(other, VarRef):
            self.terms[other.index] = self.terms.get(other.index, 0.0) + sign
        else:
            self.const += sign * float(other)
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __iadd__(self, other):
        return self._iadd(other, 1.0)

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __isub__(self, other):
        return self._iadd(other, -1.0)

    def __rsub__(self, other):
        return (-1.0 * self)._iadd(other, 1.0)

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def __neg__(self):
        return self * -1.0

    def __repr__(self) -> str:
        return f"LinExpr({self.terms}, const={self.const})"


def lin_sum(items: Iterable) -> LinExpr:
    """Sum of VarRefs / LinExprs / numbers without intermediate copies."""
    out = LinExpr()
    for it in items:
        out._iadd(it, 1.0)
    return out


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    int_tol: float = 1e-6
    max_simplex_iters: int = 100_000
    max_bnb_nodes: int = 100_000
    time_limit: float = INF
    backend: str = "highs"  # "highs" or "reference"
    mip_rel_gap: float = 1e-9

    def __post_init__(self):
        for nm in ("feas_tol", "opt_tol", "int_tol", "mip_rel_gap"):
            if not getattr(self, nm) > 0:
                raise ModelError(f"{nm} must be > 0")


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    x: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, var: VarRef | int) -> float:
        i = var.index if isinstance(var, VarRef) else int(var)
        return float(self.x[i])

    def value(self, expr) -> float:
        if isinstance(expr, VarRef):
            return self[expr]
        return float(sum(c * self.x[i] for i, c in expr.terms.items()) + expr.const)

    @property
    def values(self) -> dict[int, float]:
        return {i: float(v) for i, v in enumerate(self.x)} if self.x is not None else {}


@dataclass
class CompiledModel:
    """Array form: ``row_lo <= A x <= row_hi``, ``lb <= x <= ub``, objective ``c x + c0``.

    ``maximize`` only records the user's sense; ``c`` is always the minimization
    vector (negated for max models) and ``objective_value`` undoes the sign.
    """

    c: np.ndarray
    c0: float
    maximize: bool
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray  # 1 for integer/binary, 0 for continuous

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def is_mip(self) -> bool:
        return bool(self.integrality.any())

    def objective_value(self, min_obj: float) -> float:
        v = min_obj + self.c0
        return -v if self.maximize else v

    def copy(self) -> "CompiledModel":
        return CompiledModel(
            self.c.copy(), self.c0, self.maximize, self.A.copy(), self.row_lo.copy(),
            self.row_hi.copy(), self.lb.copy(), self.ub.copy(), self.integrality.copy(),
        )

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of ``x`` (absolute)."""
        ax = self.A @ x
        viol = [
            np.max(self.lb - x, initial=0.0),
            np.max(x - self.ub, initial=0.0),
            np.max(self.row_lo - ax, initial=0.0),
            np.max(ax - self.row_hi, initial=0.0),
        ]
        return float(max(viol))


class LinearModel:
    """Mutable model builder; ``freeze()`` returns the compiled array form."""

    def __init__(self, name: str = ""):
        self.name = name
        self.vars: list[VarRef] = []
        self._rows_idx: list[np.ndarray] = []
        self._rows_val: list[np.ndarray] = []
        self.row_lo: list[float] = []
        self.row_hi: list[float] = []
        self.row_names: list[str] = []
        self.objective = LinExpr()
        self.maximize = False
        self._frozen: CompiledModel | None = None

    # -- variables ---------------------------------------------------------
    def add_var(self, lo: float = 0.0, hi: float = INF, kind: str = CONTINUOUS, name: str = "") -> VarRef:
        self._check_open()
        if kind not in _KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        lo, hi = float(lo), float(hi)
        if kind == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi or math.isnan(lo) or math.isnan(hi):
            raise ModelError(f"variable {name or len(self.vars)}: lo {lo} > hi {hi}")
        v = VarRef(len(self.vars), lo, hi, kind, name or f"x{len(self.vars)}")
        self.vars.append(v)
        return v

    def set_bounds(self, var: VarRef, lo: float, hi: float) -> None:
        self._check_open()
        if lo > hi:
            raise ModelError(f"{var.name}: lo {lo} > hi {hi}")
        var.lo, var.hi = float(lo), float(hi)

    # -- constraints ---------------------------------------------------------
    def add_constr(self, expr, sense: str, rhs=0.0, name: str = "") -> int:
        """Add ``expr sense rhs`` with sense in ``<=``, ``>=``, ``==``; returns the row index."""
        self._check_open()
        if isinstance(expr, VarRef):
            expr = expr.expr()
        if isinstance(rhs, (LinExpr, VarRef)):
            expr = expr - rhs
            rhs = 0.0
        b = float(rhs) - expr.const
        if sense in ("<=", "<"):
            lo, hi = -INF, b
        elif sense in (">=", ">"):
            lo, hi = b, INF
        elif sense in ("==", "="):
            lo = hi = b
        else:
            raise ModelError(f"unknown sense {sense!r}")
        return self.add_range(expr.terms, lo, hi, name)

    def add_range(self, terms: Mapping[int, float], lo: float, hi: float, name: str = "") -> int:
        """Add ``lo <= sum(terms) <= hi`` directly from an index->coefficient map."""
        self._check_open()
        n = len(self.vars)
        idx = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
        val = np.fromiter(terms.values(), dtype=float, count=len(terms))
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ModelError(f"row {name!r} references an undeclared variable")
        if not np.all(np.isfinite(val)):
            raise ModelError(f"row {name!r} has a non-finite coefficient")
        keep = val != 0.0
        self._rows_idx.append(idx[keep])
        self._rows_val.append(val[keep])
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        self.row_names.append(name or f"r{len(self.row_names)}")
        return len(self.row_names) - 1

    def set_objective(self, expr, maximize: bool = False) -> None:
        self._check_open()
        if isinstance(expr, VarRef):
            expr = expr.expr()
        elif not isinstance(expr, LinExpr):
            expr = LinExpr(const=float(expr))
        for i, c in expr.terms.items():
            if not math.isfinite(c):
                raise ModelError("objective has a non-finite coefficient")
            if not 0 <= i < len(self.vars):
                raise ModelError("objective references an undeclared variable")
        self.objective = expr
        self.maximize = bool(maximize)

    # -- compile -----------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.vars)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def is_mip(self) -> bool:
        return any(v.kind != CONTINUOUS for v in self.vars)

    def freeze(self) -> CompiledModel:
        if self._frozen is not None:
            return self._frozen
        n, m = len(self.vars), len(self.row_names)
        c = np.zeros(n)
        for i, coef in self.objective.terms.items():
            c[i] += coef
        c0 = self.objective.const
        if self.maximize:
            c, c0 = -c, -c0
        lengths = [len(r) for r in self._rows_idx]
        indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        indices = np.concatenate(self._rows_idx) if m else np.zeros(0, np.int64)
        data = np.concatenate(self._rows_val) if m else np.zeros(0)
        A = sp.csr_matrix((data, indices, indptr), shape=(m, n))
        A.sum_duplicates()
        self._frozen = CompiledModel(
            c=c,
            c0=c0,
            maximize=self.maximize,
            A=A,
            row_lo=np.array(self.row_lo, dtype=float),
            row_hi=np.array(self.row_hi, dtype=float),
            lb=np.array([v.lo for v in self.vars], dtype=float),
            ub=np.array([v.hi for v in self.vars], dtype=float),
            integrality=np.array([v.kind != CONTINUOUS for v in self.vars], dtype=np.int8),
        )
        return self._frozen

    def _check_open(self) -> None:
        if self._frozen is not None:
            raise ModelError("model is frozen")

    # -- LP-format dump ----------------------------------------------------
    def to_lp(self) -> str:
        """CPLEX LP-format text of the model, for cross-checking with external solvers."""
        cm = self.freeze()
        names = [_lp_name(v.name, v.index) for v in self.vars]

        def fmt(idx, val) -> str:
            parts = []
            for i, c in zip(idx, val):
                parts.append(f"{'-' if c < 0 else '+'} {abs(c):.17g} {names[i]}")
            return " ".join(parts) if parts else "0 " + (names[0] if names else "")

        obj = self.objective
        lines = [f"\\ model {self.name}", "Maximize" if self.maximize else "Minimize"]
        lines.append(" obj: " + fmt(list(obj.terms.keys()), list(obj.terms.values())))
        lines.append("Subject To")
        A = cm.A
        for r in range(cm.n_rows):
            s, e = A.indptr[r], A.indptr[r + 1]
            body = fmt(A.indices[s:e], A.data[s:e])
            lo, hi = cm.row_lo[r], cm.row_hi[r]
            rn = _lp_name(self.row_names[r], r, "r")
            if lo == hi:
                lines.append(f" {rn}: {body} = {hi:.17g}")
            elif math.isinf(lo):
                lines.append(f" {rn}: {body} <= {hi:.17g}")
            elif math.isinf(hi):
                lines.append(f" {rn}: {body} >= {lo:.17g}")
            else:
                lines.append(f" {rn}_lo: {body} >= {lo:.17g}")
                lines.append(f" {rn}_hi: {body} <= {hi:.17g}")
        lines.append("Bounds")
        for v, nm in zip(self.vars, names):
            lo = "-inf" if math.isinf(v.lo) else f"{v.lo:.17g}"
            hi = "+inf" if math.isinf(v.hi) else f"{v.hi:.17g}"
            lines.append(f" {lo} <= {nm} <= {hi}")
        gen = [nm for v, nm in zip(self.vars, names) if v.kind == INTEGER]
        binv = [nm for v, nm in zip(self.vars, names) if v.kind == BINARY]
        if gen:
            lines += ["General", " " + " ".join(gen)]
        if binv:
            lines += ["Binary", " " + " ".join(binv)]
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_name(name: str, i: int, prefix: str = "x") -> str:
    safe = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in name)
    if not safe or safe[0].isdigit() or safe[0] == ".":
        safe = f"{prefix}{i}_{safe}"
    return safe
