"""Run configuration: one JSON document plus command-line overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..certify import GuaranteeMode, Margin
from ..grid import NetworkCase, demo_case_path, load_case
from ..rsp import FormulationKind
from ..scenarios import RNG_ALGORITHM, ScenarioGenerator, WindModel, load_profiles


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSource:
    """``generator`` builds a synthetic source from the case; ``file`` reads a profile CSV."""

    kind: str = "generator"
    path: str | None = None
    base_days: int = 365
    sigma_rel: float = 0.01
    wind: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("generator", "file"):
            raise ConfigError(f"unknown scenario source {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("file source needs a path")
        if self.base_days < 1:
            raise ConfigError("base_days must be positive")


@dataclass(frozen=True)
class RunConfig:
    case: str = "case3"
    scenarios: ScenarioSource = field(default_factory=ScenarioSource)
    kind: str = "c-cost"
    eps_bar: float = 0.05
    beta: float = 1e-3
    initial_k_guess: int = 1
    mode: str | None = None  # None picks posterior_convex for c-RSP, posterior_nonconvex otherwise
    s_bar: int | None = None
    seed: int = 0
    experiments: int = 1
    budget: float | None = None  # overrides the case budget when set
    budget_grid: tuple[float, ...] | None = None
    test_size: int = 2000
    gap_tol: float = 1e-4
    max_iter: int = 100
    max_guesses: int = 5
    margin_rel: float = 1e-6
    margin_abs: float = 1e-3
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if not (0 < self.eps_bar < 1) or not (0 < self.beta < 1):
            raise ConfigError("eps_bar and beta must lie in (0, 1)")
        if self.experiments < 1:
            raise ConfigError("experiments must be at least 1")
        if self.initial_k_guess < 0:
            raise ConfigError("initial_k_guess must be nonnegative")
        if self.test_size < 1 or self.max_guesses < 1 or self.workers < 1:
            raise ConfigError("test_size, max_guesses and workers must be positive")
        try:
            FormulationKind.parse(self.kind)
            if self.mode is not None:
                GuaranteeMode(self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.guarantee_mode is GuaranteeMode.IMPROVED_NONCONVEX and self.s_bar is None:
            raise ConfigError("improved_nonconvex needs s_bar")
        if self.budget is not None and not self.budget >= 0:
            raise ConfigError("budget must be nonnegative")
        if self.budget_grid is not None:
            g = list(self.budget_grid)
            if not g or any(b < 0 or math.isnan(b) for b in g) or any(b >= c for b, c in zip(g, g[1:])):
                raise ConfigError("budget_grid must be a nonempty strictly increasing list of budgets >= 0")

    @property
    def formulation(self) -> FormulationKind:
        return FormulationKind.parse(self.kind)

    @property
    def guarantee_mode(self) -> GuaranteeMode:
        if self.mode is not None:
            return GuaranteeMode(self.mode)
        return GuaranteeMode.POSTERIOR_CONVEX if self.formulation.convex else GuaranteeMode.POSTERIOR_NONCONVEX

    @property
    def margin(self) -> Margin:
        return Margin(self.margin_rel, self.margin_abs)

    def load_case(self) -> NetworkCase:
        p = Path(self.case)
        if not p.suffix and not p.exists():
            try:
                p = demo_case_path(self.case)
            except (FileNotFoundError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        case = load_case(p)
        if self.budget is not None:
            case = case.with_budget(self.budget)
        return case

    def scenario_source(self, case: NetworkCase):
        src = self.scenarios
        if src.kind == "file":
            return load_profiles(src.path, case)
        wind = WindModel(**src.wind) if src.wind else None
        return ScenarioGenerator.for_case(case, seed=self.seed, base_days=src.base_days,
                                          sigma_rel=src.sigma_rel, wind=wind)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["budget_grid"] = None if self.budget_grid is None else list(self.budget_grid)
        d["rng"] = RNG_ALGORITHM
        # the output location is not part of the run's identity; keep reports relocatable
        del d["out"]
        return d

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = dict(doc)
        rng = doc.pop("rng", RNG_ALGORITHM)
        if rng != RNG_ALGORITHM:
            raise ConfigError(f"config was written for RNG {rng!r}; this build uses {RNG_ALGORITHM!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sc = doc.get("scenarios")
        if isinstance(sc, dict):
            bad = sorted(set(sc) - {f.name for f in fields(ScenarioSource)})
            if bad:
                raise ConfigError(f"unknown scenario keys: {', '.join(bad)}")
            doc["scenarios"] = ScenarioSource(**sc)
        elif sc is not None:
            raise ConfigError("scenarios must be an object")
        if doc.get("budget_grid") is not None:
            doc["budget_grid"] = tuple(float(b) for b in doc["budget_grid"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = RunConfig.from_dict(doc)
    return cfg.with_overrides(**overrides)


def derive_seed(master: int, *key: int) -> int:
    """Independent 63-bit seed for a (master, key...) pair."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

