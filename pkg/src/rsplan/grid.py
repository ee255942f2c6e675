"""Static power-system data: buses, lines, generators, wind, loads and the storage catalog.

A case is one JSON document; see ``load_case`` / ``save_case``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any


class CaseError(ValueError):
    """Raised when a case file cannot be parsed or fails validation."""


@dataclass(frozen=True)
class Bus:
    id: int
    name: str = ""


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float  # per unit, base 1.0
    flow_min: float  # MW
    flow_max: float  # MW


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    ramp_up: float  # MW/h
    ramp_down: float  # MW/h
    marginal_cost: float  # $/MWh


@dataclass(frozen=True)
class WindFarm:
    id: int
    bus: int
    capacity: float  # MW


@dataclass(frozen=True)
class LoadPoint:
    bus: int
    peak: float  # MW
    shed_cost: float  # $/MWh


@dataclass(frozen=True)
class StorageCatalog:
    candidates: tuple[int, ...]
    cost_energy_annual: float  # $/MWh-yr
    cost_power_annual: float  # $/MW-yr
    eta_ch: float = 0.9
    eta_dis: float = 0.9
    rho_min: float = 0.2  # 1/h
    rho_max: float = 0.8  # 1/h
    unit_energy: float = 32.0  # MWh
    unit_power: float = 8.0  # MW
    max_units_per_bus: int = 4
    max_units_total: int = 20
    marginal_charge: float = 1.0  # $/MWh
    marginal_discharge: float = 18.0  # $/MWh
    budget: float = 0.0  # $

    def max_power(self) -> float:
        """Largest installable power rating at one bus under unit quantization."""
        return self.max_units_per_bus * self.unit_power


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    wind_farms: tuple[WindFarm, ...]
    loads: tuple[LoadPoint, ...]
    storage: StorageCatalog
    horizon: int = 24
    day_weight: float = 365.0
    slack_bus: int = 0
    name: str = field(default="", compare=False)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def bus_by_name(self, name: str) -> Bus:
        for b in self.buses:
            if b.name == name:
                return b
        raise KeyError(name)

    def with_budget(self, budget: float) -> "NetworkCase":
        return replace(self, storage=replace(self.storage, budget=float(budget)))

    def scaled_loads(self, factor: float) -> "NetworkCase":
        loads = tuple(replace(ld, peak=ld.peak * factor) for ld in self.loads)
        return replace(self, loads=loads)

    def investment_cost(self, energy, power) -> float:
        """Annualized storage investment of a plan given per-candidate ratings."""
        s = self.storage
        return float(
            sum(s.cost_energy_annual * e + s.cost_power_annual * p for e, p in zip(energy, power))
        )


def annualize(total_cost: float, interest: float, years: int) -> float:
    """Equivalent annual payment of ``total_cost`` over ``years`` at rate ``interest``."""
    if not interest > 0:
        raise ValueError(f"interest must be > 0, got {interest}")
    if years < 1 or int(years) != years:
        raise ValueError(f"years must be an integer >= 1, got {years}")
    growth = (1.0 + interest) ** int(years)
    return total_cost * interest * growth / (growth - 1.0)


def validate_case(case: NetworkCase) -> list[str]:
    """Return human-readable invariant violations; an empty list means the case is valid.

    Entries prefixed ``warning:`` are advisory (penalty ordering, minimum generation)
    and do not make ``load_case`` fail.
    """
    out: list[str] = []
    n = len(case.buses)
    ids = [b.id for b in case.buses]
    if sorted(ids) != list(range(n)):
        out.append("bus ids must be dense 0..N-1 and unique")
    known = set(ids)

    def bus_ok(b: int, what: str) -> None:
        if b not in known:
            out.append(f"{what}: unknown bus {b}")

    for ln in case.lines:
        bus_ok(ln.from_bus, f"line {ln.id}")
        bus_ok(ln.to_bus, f"line {ln.id}")
        if ln.from_bus == ln.to_bus:
            out.append(f"line {ln.id}: from_bus equals to_bus")
        if not ln.reactance > 0:
            out.append(f"line {ln.id}: reactance must be > 0")
        if not (ln.flow_min <= 0 <= ln.flow_max):
            out.append(f"line {ln.id}: flow limits must satisfy flow_min <= 0 <= flow_max")
    for g in case.generators:
        bus_ok(g.bus, f"generator {g.id}")
        if not (0 <= g.p_min <= g.p_max):
            out.append(f"generator {g.id}: need 0 <= p_min <= p_max")
        if g.ramp_up < 0 or g.ramp_down < 0:
            out.append(f"generator {g.id}: ramp limits must be >= 0")
        if g.marginal_cost < 0:
            out.append(f"generator {g.id}: marginal_cost must be >= 0")
    for w in case.wind_farms:
        bus_ok(w.bus, f"wind farm {w.id}")
        if w.capacity < 0:
            out.append(f"wind farm {w.id}: capacity must be >= 0")
    for i, ld in enumerate(case.loads):
        bus_ok(ld.bus, f"load {i}")
        if ld.peak < 0:
            out.append(f"load {i}: peak must be >= 0")

    s = case.storage
    for b in s.candidates:
        bus_ok(b, "storage candidate")
    if len(set(s.candidates)) != len(s.candidates):
        out.append("storage candidates must be unique")
    for nm in ("eta_ch", "eta_dis"):
        v = getattr(s, nm)
        if not (0 < v <= 1):
            out.append(f"{nm} out of (0,1]")
    if not (0 < s.rho_min <= s.rho_max):
        out.append("need 0 < rho_min <= rho_max")
    if not (s.unit_energy > 0 and s.unit_power > 0):
        out.append("unit_energy and unit_power must be > 0")
    if s.budget < 0:
        out.append("budget must be >= 0")
    if s.max_units_per_bus < 0 or s.max_units_total < 0:
        out.append("unit limits must be >= 0")
    if min(s.cost_energy_annual, s.cost_power_annual, s.marginal_charge, s.marginal_discharge) < 0:
        out.append("storage costs must be >= 0")

    if case.horizon < 1:
        out.append("horizon must be >= 1")
    if case.day_weight <= 0:
        out.append("day_weight must be > 0")
    if case.slack_bus not in known:
        out.append(f"slack_bus: unknown bus {case.slack_bus}")

    if case.generators:
        top = max(g.marginal_cost for g in case.generators)
        for i, ld in enumerate(case.loads):
            if ld.shed_cost <= top:
                out.append(
                    f"warning: load {i} shed_cost {ld.shed_cost} does not exceed "
                    f"max generator marginal cost {top}"
                )
    if any(g.p_min > 0 for g in case.generators):
        out.append("warning: p_min > 0 can make the second stage infeasible under low load")
    return out


def _errors(violations: list[str]) -> list[str]:
    return [v for v in violations if not v.startswith("warning:")]


def case_from_dict(doc: dict[str, Any], name: str = "") -> NetworkCase:
    try:
        st = dict(doc["storage"])
        st["candidates"] = tuple(int(b) for b in st["candidates"])
        case = NetworkCase(
            buses=tuple(Bus(int(b["id"]), str(b.get("name", b["id"]))) for b in doc["buses"]),
            lines=tuple(Line(**{k: _num(k, v) for k, v in ln.items()}) for ln in doc["lines"]),
            generators=tuple(Generator(**{k: _num(k, v) for k, v in g.items()}) for g in doc["generators"]),
            wind_farms=tuple(WindFarm(**{k: _num(k, v) for k, v in w.items()}) for w in doc["wind_farms"]),
            loads=tuple(LoadPoint(**{k: _num(k, v) for k, v in ld.items()}) for ld in doc["loads"]),
            storage=StorageCatalog(**st),
            horizon=int(doc.get("horizon", 24)),
            day_weight=float(doc.get("day_weight", 365.0)),
            slack_bus=int(doc.get("slack_bus", 0)),
            name=name or str(doc.get("name", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseError(f"malformed case document: {exc!r}") from exc
    errs = _errors(validate_case(case))
    if errs:
        raise CaseError(f"invalid case: {errs[0]}")
    return case


_INT_FIELDS = {"id", "bus", "from_bus", "to_bus"}


def _num(key: str, value: Any) -> Any:
    if key in _INT_FIELDS:
        return int(value)
    return float(value)


def case_to_dict(case: NetworkCase) -> dict[str, Any]:
    st = asdict(case.storage)
    st["candidates"] = list(case.storage.candidates)
    return {
        "name": case.name,
        "buses": [asdict(b) for b in case.buses],
        "lines": [asdict(x) for x in case.lines],
        "generators": [asdict(x) for x in case.generators],
        "wind_farms": [asdict(x) for x in case.wind_farms],
        "loads": [asdict(x) for x in case.loads],
        "storage": st,
        "horizon": case.horizon,
        "day_weight": case.day_weight,
        "slack_bus": case.slack_bus,
    }


def load_case(path: str | Path) -> NetworkCase:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}: not valid JSON ({exc})") from exc
    return case_from_dict(doc, name=path.stem)


def save_case(case: NetworkCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2) + "\n")


def demo_case_path(name: str) -> Path:
    """Path of a case shipped with the package (``case3`` or ``case6``)."""
    from importlib import resources

    return Path(str(resources.files("rsplan") / "data" / f"{name}.json"))


def table2_storage(candidates, budget: float, **overrides) -> StorageCatalog:
    """Storage catalog with the reference battery parameters.

    Capital costs are 500 $/kW and 20 $/kWh over 10 years at 10 % interest,
    annualized and converted to $/MW-yr and $/MWh-yr.
    """
    factor = annualize(1.0, 0.10, 10)
    params = dict(
        candidates=tuple(candidates),
        cost_energy_annual=20.0 * 1000.0 * factor,
        cost_power_annual=500.0 * 1000.0 * factor,
        eta_ch=0.9,
        eta_dis=0.9,
        rho_min=0.2,
        rho_max=0.8,
        unit_energy=32.0,
        unit_power=8.0,
        max_units_per_bus=4,
        max_units_total=20,
        marginal_charge=1.0,
        marginal_discharge=18.0,
        budget=float(budget),
    )
    params.update(overrides)
    return StorageCatalog(**params)

