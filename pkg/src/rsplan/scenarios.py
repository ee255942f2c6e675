"""Daily uncertainty scenarios: load and wind capacity factors.

All randomness goes through Philox generators derived from a master seed and a
stream index, so any scenario can be regenerated on its own.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import NetworkCase

RNG_ALGORITHM = "philox4x64-10"
_RANGE_TOL = 1e-9


class ScenarioError(ValueError):
    pass


def stream_rng(seed: int, stream: int | Sequence[int] = ()) -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream)``."""
    key = (stream,) if isinstance(stream, int) else tuple(stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return stream_rng(int(rng_seed))


@dataclass(frozen=True)
class DailyScenario:
    load_factor: np.ndarray  # [bus, t]
    wind_factor: np.ndarray  # [farm, t]

    def __post_init__(self):
        lf = np.array(self.load_factor, dtype=float, ndmin=2)
        wf = np.array(self.wind_factor, dtype=float, ndmin=2)
        if wf.size == 0:
            wf = np.zeros((0, lf.shape[1]))
        if lf.shape[1] != wf.shape[1]:
            raise ScenarioError("load and wind profiles have different horizons")
        for name, arr in (("load", lf), ("wind", wf)):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ScenarioError(f"{name} factor outside [0,1]")
        lf.flags.writeable = False
        wf.flags.writeable = False
        object.__setattr__(self, "load_factor", lf)
        object.__setattr__(self, "wind_factor", wf)

    @property
    def horizon(self) -> int:
        return self.load_factor.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DailyScenario):
            return NotImplemented
        return np.array_equal(self.load_factor, other.load_factor) and np.array_equal(
            self.wind_factor, other.wind_factor
        )

    def __hash__(self):
        return hash((self.load_factor.tobytes(), self.wind_factor.tobytes()))

    def fits(self, case: NetworkCase) -> bool:
        return self.load_factor.shape == (case.n_buses, case.horizon) and self.wind_factor.shape == (
            len(case.wind_farms),
            case.horizon,
        )


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[DailyScenario, ...]
    provenance: str = ""
    seed: int | None = None
    # positions in the parent set when this set was drawn or split from one
    indices: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        shapes = {(s.load_factor.shape, s.wind_factor.shape) for s in self.scenarios}
        if len(shapes) > 1:
            raise ScenarioError("scenarios have inconsistent dimensions")

    def __len__(self) -> int:
        return len(self.scenarios)

    def __getitem__(self, i):
        return self.scenarios[i]

    def __iter__(self):
        return iter(self.scenarios)

    def check_case(self, case: NetworkCase) -> None:
        if self.scenarios and not self.scenarios[0].fits(case):
            raise ScenarioError("scenario dimensions do not match the case")

    def subset(self, idx: Sequence[int], provenance: str = "") -> "ScenarioSet":
        idx = tuple(int(i) for i in idx)
        return ScenarioSet(tuple(self.scenarios[i] for i in idx), provenance or self.provenance, self.seed, idx)


@dataclass(frozen=True)
class WindModel:
    weibull_scale: float = 11.0086  # m/s
    weibull_shape: float = 1.9622
    v_cut_in: float = 4.0
    v_rated: float = 13.61
    v_cut_out: float = 25.0

    def __post_init__(self):
        if not (0 < self.v_cut_in < self.v_rated < self.v_cut_out):
            raise ScenarioError("need 0 < cut-in < rated < cut-out")
        if self.weibull_scale <= 0 or self.weibull_shape <= 0:
            raise ScenarioError("Weibull scale and shape must be positive")

    def mean_speed(self) -> float:
        return self.weibull_scale * math.gamma(1.0 + 1.0 / self.weibull_shape)


@dataclass(frozen=True)
class LoadNoiseModel:
    base_profiles: tuple[np.ndarray, ...]  # each [bus, t]
    sigma_rel: float = 0.01

    def __post_init__(self):
        if self.sigma_rel < 0:
            raise ScenarioError("sigma_rel must be nonnegative")
        profiles = tuple(np.array(p, dtype=float, ndmin=2) for p in self.base_profiles)
        if not profiles:
            raise ScenarioError("need at least one base profile")
        object.__setattr__(self, "base_profiles", profiles)


def wind_capacity_factor(speed, model: WindModel):
    """Cubic power curve; accepts scalars or arrays."""
    v = np.asarray(speed, dtype=float)
    if np.any(v < 0):
        raise ScenarioError("wind speed must be nonnegative")
    ci3 = model.v_cut_in**3
    ramp = (v**3 - ci3) / (model.v_rated**3 - ci3)
    out = np.where(
        (v < model.v_cut_in) | (v >= model.v_cut_out),
        0.0,
        np.where(v >= model.v_rated, 1.0, ramp),
    )
    return float(out) if out.ndim == 0 else out


def generate_wind_day(model: WindModel, rng_seed, farms: int, T: int) -> np.ndarray:
    """Hourly-independent Weibull speeds per farm, mapped through the power curve."""
    if T < 1:
        raise ScenarioError("T must be at least 1")
    rng = _as_rng(rng_seed)
    speeds = model.weibull_scale * rng.weibull(model.weibull_shape, size=(farms, T))
    return wind_capacity_factor(speeds, model).reshape(farms, T)


def generate_load_day(model: LoadNoiseModel, rng_seed) -> np.ndarray:
    rng = _as_rng(rng_seed)
    base = model.base_profiles[int(rng.integers(len(model.base_profiles)))]
    noise = rng.standard_normal(base.shape) * (model.sigma_rel * base)
    return np.clip(base + noise, 0.0, 1.0)


def synthetic_base_profiles(case: NetworkCase, days: int, seed: int) -> tuple[np.ndarray, ...]:
    """Smooth two-peak daily load shapes with day-to-day level changes.

    Buses without load get zero rows. Values stay in [0.35, 1].
    """
    T = case.horizon
    rng = stream_rng(seed, (1,))
    h = np.arange(T) * 24.0 / T
    shape = 0.62 + 0.18 * np.exp(-((h - 11.0) ** 2) / 8.0) + 0.25 * np.exp(-((h - 19.0) ** 2) / 6.0)
    shape = shape - 0.1 * np.exp(-((h - 4.0) ** 2) / 6.0)
    shape = shape / shape.max()
    has_load = np.zeros(case.n_buses, dtype=bool)
    for ld in case.loads:
        has_load[ld.bus] = True
    out = []
    for _ in range(days):
        level = rng.uniform(0.8, 1.0)
        per_bus = rng.uniform(0.95, 1.0, size=(case.n_buses, 1))
        prof = np.clip(level * per_bus * shape[None, :], 0.35, 1.0)
        prof[~has_load] = 0.0
        out.append(prof)
    return tuple(out)


@dataclass(frozen=True)
class ScenarioGenerator:
    """Synthetic source: Weibull wind plus noisy historical load days."""

    wind: WindModel
    load: LoadNoiseModel
    n_farms: int
    horizon: int

    def day(self, seed: int, index: int) -> DailyScenario:
        lf = generate_load_day(self.load, stream_rng(seed, (index, 0)))
        wf = generate_wind_day(self.wind, stream_rng(seed, (index, 1)), self.n_farms, self.horizon)
        return DailyScenario(lf, wf)

    def descriptor(self) -> dict:
        return {
            "kind": "synthetic",
            "rng": RNG_ALGORITHM,
            "wind": {
                "weibull_scale": self.wind.weibull_scale,
                "weibull_shape": self.wind.weibull_shape,
                "v_cut_in": self.wind.v_cut_in,
                "v_rated": self.wind.v_rated,
                "v_cut_out": self.wind.v_cut_out,
            },
            "load": {"sigma_rel": self.load.sigma_rel, "base_days": len(self.load.base_profiles)},
            "n_farms": self.n_farms,
            "horizon": self.horizon,
        }

    @classmethod
    def for_case(cls, case: NetworkCase, seed: int = 0, base_days: int = 365, sigma_rel: float = 0.01,
                 wind: WindModel | None = None) -> "ScenarioGenerator":
        base = synthetic_base_profiles(case, base_days, seed)
        return cls(wind or WindModel(), LoadNoiseModel(base, sigma_rel), len(case.wind_farms), case.horizon)


def sample_iid(source, K: int, seed: int, replace: bool = True) -> ScenarioSet:
    """Draw ``K`` scenarios.

    From a finite ``ScenarioSet`` draws are uniform with replacement, which is
    i.i.d. from the empirical distribution. ``replace=False`` draws distinct
    entries instead; those draws are not independent.
    """
    if K < 1:
        raise ScenarioError("K must be at least 1")
    rng = stream_rng(seed, (0,))
    if isinstance(source, ScenarioSet):
        n = len(source)
        if n == 0:
            raise ScenarioError("cannot sample from an empty set")
        if replace:
            idx = rng.integers(n, size=K)
        else:
            if K > n:
                raise ScenarioError(f"cannot draw {K} distinct scenarios from {n}")
            idx = rng.permutation(n)[:K]
        mode = "with" if replace else "without"
        prov = f"sample_iid(seed={seed}, K={K}, {mode} replacement) of [{source.provenance}]"
        return ScenarioSet(tuple(source.scenarios[i] for i in idx), prov, seed, tuple(int(i) for i in idx))
    if isinstance(source, ScenarioGenerator):
        prov = json.dumps({"sample_iid": {"seed": seed, "K": K}, "source": source.descriptor()}, sort_keys=True)
        return ScenarioSet(tuple(source.day(seed, i) for i in range(K)), prov, seed)
    raise TypeError(f"unsupported scenario source {type(source).__name__}")


def split_indices(n: int, train: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if train < 0 or train > n:
        raise ScenarioError(f"train size {train} exceeds set size {n}")
    perm = stream_rng(seed, (2,)).permutation(n)
    return np.sort(perm[:train]), np.sort(perm[train:])


def split(sset: ScenarioSet, train: int, seed: int) -> tuple[ScenarioSet, ScenarioSet]:
    """Disjoint random train/test partition."""
    tr, te = split_indices(len(sset), train, seed)
    return (
        sset.subset(tr, f"train split (seed={seed}) of [{sset.provenance}]"),
        sset.subset(te, f"test split (seed={seed}) of [{sset.provenance}]"),
    )


# --- CSV io ---

CSV_HEADER = ("day", "hour", "kind", "entity", "value")


def load_profiles(path: str | Path, case: NetworkCase) -> ScenarioSet:
    """Read a ``day,hour,kind,entity,value`` file; one scenario per day.

    Buses without load may be omitted and default to zero. Every loaded bus and
    every farm needs a value for each hour.
    """
    path = Path(path)
    T, nb, nf = case.horizon, case.n_buses, len(case.wind_farms)
    days: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
                raise ScenarioError(f"{path}: expected header {','.join(CSV_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 5:
                    raise ScenarioError(f"{path}:{lineno}: expected 5 fields")
                day, hour, kind, entity = int(row[0]), int(row[1]), row[2].strip(), int(row[3])
                value = float(row[4])
                if kind not in ("load", "wind"):
                    raise ScenarioError(f"{path}:{lineno}: unknown kind {kind!r}")
                if not 0 <= hour < T:
                    raise ScenarioError(f"{path}:{lineno}: hour {hour} outside 0..{T - 1}")
                limit = nb if kind == "load" else nf
                if not 0 <= entity < limit:
                    raise ScenarioError(f"{path}:{lineno}: unknown {kind} entity {entity}")
                if not math.isfinite(value) or value < 0.0 or value > 1.0 + _RANGE_TOL:
                    raise ScenarioError(f"{path}:{lineno}: factor {value} out of range [0,1]")
                if day not in days:
                    days[day] = (np.zeros((nb, T)), np.zeros((nf, T)), np.zeros((nb, T), bool), np.zeros((nf, T), bool))
                lf, wf, lseen, wseen = days[day]
                arr, seen = (lf, lseen) if kind == "load" else (wf, wseen)
                if seen[entity, hour]:
                    raise ScenarioError(f"{path}:{lineno}: duplicate entry")
                seen[entity, hour] = True
                arr[entity, hour] = min(value, 1.0)
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: parse error: {exc}") from exc
    loaded = sorted({ld.bus for ld in case.loads})
    out = []
    for day in sorted(days):
        lf, wf, lseen, wseen = days[day]
        if not lseen[loaded].all() or not wseen.all():
            raise ScenarioError(f"{path}: day {day} is missing entries for the case dimensions")
        out.append(DailyScenario(lf, wf))
    return ScenarioSet(tuple(out), str(path), None)


def save_profiles(sset: ScenarioSet, path: str | Path, descriptor: dict | None = None) -> None:
    """Write the CSV; with a descriptor also write ``<path>.json`` next to it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for d, sc in enumerate(sset):
            for kind, arr in (("load", sc.load_factor), ("wind", sc.wind_factor)):
                for e in range(arr.shape[0]):
                    for t in range(arr.shape[1]):
                        w.writerow((d, t, kind, e, repr(float(arr[e, t]))))
    if descriptor is not None:
        path.with_suffix(".json").write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n")


def synthetic_history(case: NetworkCase, days: int, seed: int, sigma_rel: float = 0.01) -> tuple[ScenarioSet, dict]:
    """A history-like set of ``days`` scenarios plus the descriptor that regenerates it."""
    gen = ScenarioGenerator.for_case(case, seed=seed, base_days=days, sigma_rel=sigma_rel)
    sset = sample_iid(gen, days, seed)
    desc = {"generator": gen.descriptor(), "seed": seed, "days": days, "case": case.name}
    return sset, desc
