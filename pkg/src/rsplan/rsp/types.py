"""Records shared by the planning code: formulation kinds, plans, outcomes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..grid import NetworkCase


class RspError(RuntimeError):
    pass


OBJECTIVES = ("cost", "curtailment")


@dataclass(frozen=True)
class FormulationKind:
    """Objective (``cost`` or ``curtailment``) and convexity.

    ``convex=True`` is the relaxed model: continuous (E, P) within power/energy
    ratio bounds and relaxed charge/discharge status. ``convex=False`` keeps
    quantized units and binary status.
    """

    objective: str = "cost"
    convex: bool = True
    cyclic_soc: bool = False

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")

    @property
    def label(self) -> str:
        return f"{'c' if self.convex else 'nc'}-{self.objective}"

    @classmethod
    def parse(cls, text: str) -> "FormulationKind":
        """``c-cost``, ``nc-cost``, ``c-curtailment`` or ``nc-curtailment``."""
        conv, _, obj = text.partition("-")
        if conv not in ("c", "nc") or obj not in OBJECTIVES:
            raise ValueError(f"unknown formulation {text!r}")
        return cls(obj, conv == "c")


ALL_KINDS = tuple(FormulationKind(o, c) for c in (True, False) for o in OBJECTIVES)


@dataclass(frozen=True)
class StoragePlan:
    """Per-candidate ratings, ordered like ``case.storage.candidates``."""

    energy: tuple[float, ...]
    power: tuple[float, ...]
    units: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "energy", tuple(float(e) for e in self.energy))
        object.__setattr__(self, "power", tuple(float(p) for p in self.power))
        if self.units is not None:
            object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        if len(self.energy) != len(self.power):
            raise ValueError("energy and power lengths differ")

    @classmethod
    def zero(cls, case: NetworkCase, quantized: bool = False) -> "StoragePlan":
        n = len(case.storage.candidates)
        return cls((0.0,) * n, (0.0,) * n, (0,) * n if quantized else None)

    @classmethod
    def from_units(cls, case: NetworkCase, units) -> "StoragePlan":
        st = case.storage
        units = tuple(int(u) for u in units)
        return cls(tuple(st.unit_energy * u for u in units), tuple(st.unit_power * u for u in units), units)

    def investment_cost(self, case: NetworkCase) -> float:
        return case.investment_cost(self.energy, self.power)

    def total_energy(self) -> float:
        return math.fsum(self.energy)

    def total_power(self) -> float:
        return math.fsum(self.power)

    def violations(self, case: NetworkCase, kind: FormulationKind, tol: float = 1e-6) -> list[str]:
        st = case.storage
        out = []
        if len(self.energy) != len(st.candidates):
            return [f"plan has {len(self.energy)} entries, case has {len(st.candidates)} candidates"]
        if min(self.energy + self.power, default=0.0) < -tol:
            out.append("negative rating")
        if kind.convex:
            for e, p in zip(self.energy, self.power):
                if p < st.rho_min * e - tol or p > st.rho_max * e + tol:
                    out.append("power/energy ratio outside bounds")
                    break
        else:
            if self.units is None:
                out.append("quantized plan needs unit counts")
            else:
                for u, e, p in zip(self.units, self.energy, self.power):
                    if not (0 <= u <= st.max_units_per_bus):
                        out.append("unit count outside [0, max_units_per_bus]")
                    if abs(e - st.unit_energy * u) > tol or abs(p - st.unit_power * u) > tol:
                        out.append("ratings do not match unit count")
                if sum(self.units) > st.max_units_total:
                    out.append("total units above limit")
        budget = st.budget
        if math.isfinite(budget) and self.investment_cost(case) > budget * (1 + 1e-9) + tol:
            out.append("investment exceeds budget")
        return out

    def to_dict(self) -> dict:
        return {"energy": list(self.energy), "power": list(self.power),
                "units": None if self.units is None else list(self.units)}

    @classmethod
    def from_dict(cls, d: dict) -> "StoragePlan":
        return cls(tuple(d["energy"]), tuple(d["power"]), None if d.get("units") is None else tuple(d["units"]))


@dataclass
class OperationOutcome:
    total_cost: float  # $ for the day
    total_shed: float  # MWh for the day
    value: float  # the second-stage objective of the kind that was solved
    schedule: dict[str, np.ndarray] = field(default_factory=dict)
    balance_residual: float = 0.0
    simultaneous: int = 0  # (bus, t) pairs charging and discharging at once

    def to_dict(self) -> dict:
        return {
            "total_cost": self.total_cost,
            "total_shed": self.total_shed,
            "value": self.value,
            "balance_residual": self.balance_residual,
            "simultaneous": self.simultaneous,
            "schedule": {k: v.tolist() for k, v in self.schedule.items()},
        }


@dataclass
class RobustSolution:
    plan: StoragePlan
    gamma: float
    objective: float
    lb: float
    ub: float
    critical_set: tuple[int, ...]
    iterations: int
    converged: bool = True
    history: list[tuple[float, float]] = field(default_factory=list)
    kind: FormulationKind = field(default_factory=FormulationKind)

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "gamma": self.gamma,
            "objective": self.objective,
            "lb": self.lb,
            "ub": self.ub,
            "critical_set": list(self.critical_set),
            "iterations": self.iterations,
            "converged": self.converged,
            "kind": self.kind.label,
        }


@dataclass(frozen=True)
class EssentialSet:
    indices: tuple[int, ...]

    @property
    def cardinality(self) -> int:
        return len(self.indices)
