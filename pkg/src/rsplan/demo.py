"""Shipped demonstration systems.

``case3`` is a small congested system used for quick checks. ``case6`` follows
the classic six-bus test system (three units, seven lines, three load buses)
with unit costs raised by 20 % and two 100 MW wind farms at buses 5 and 6.
Generator minimum outputs are set to zero in both cases.
"""

from __future__ import annotations

import numpy as np

from .grid import Bus, Generator, Line, LoadPoint, NetworkCase, WindFarm, table2_storage

SHED_COST = 1000.0  # $/MWh


def desk_case(budget: float = 1.5e6) -> NetworkCase:
    buses = tuple(Bus(i, str(i + 1)) for i in range(3))
    lines = (
        Line(0, 0, 1, 0.1, -100.0, 100.0),
        Line(1, 0, 2, 0.1, -60.0, 60.0),
        Line(2, 1, 2, 0.1, -60.0, 60.0),
    )
    gens = (
        Generator(0, 0, 0.0, 150.0, 40.0, 40.0, 20.0),
        Generator(1, 1, 0.0, 40.0, 15.0, 15.0, 60.0),
    )
    wind = (WindFarm(0, 2, 80.0),)
    loads = (LoadPoint(1, 70.0, SHED_COST), LoadPoint(2, 100.0, SHED_COST))
    return NetworkCase(buses, lines, gens, wind, loads, table2_storage((1, 2), budget), name="case3")


def six_bus_case(budget: float = 5e6) -> NetworkCase:
    buses = tuple(Bus(i, str(i + 1)) for i in range(6))
    # (from, to, reactance, limit) with 1-based bus labels
    raw = [(1, 2, 0.170, 200.0), (1, 4, 0.258, 100.0), (2, 4, 0.197, 100.0), (5, 6, 0.140, 100.0),
           (3, 5, 0.018, 100.0), (2, 3, 0.037, 100.0), (4, 6, 0.037, 100.0)]
    lines = tuple(Line(j, a - 1, b - 1, x, -lim, lim) for j, (a, b, x, lim) in enumerate(raw))
    gens = (
        Generator(0, 0, 0.0, 220.0, 55.0, 55.0, round(13.51 * 1.2, 4)),
        Generator(1, 1, 0.0, 100.0, 50.0, 50.0, round(32.63 * 1.2, 4)),
        Generator(2, 5, 0.0, 20.0, 20.0, 20.0, round(17.70 * 1.2, 4)),
    )
    wind = (WindFarm(0, 4, 100.0), WindFarm(1, 5, 100.0))
    loads = (LoadPoint(2, 120.0, SHED_COST), LoadPoint(3, 120.0, SHED_COST), LoadPoint(4, 60.0, SHED_COST))
    storage = table2_storage(tuple(range(6)), budget)
    return NetworkCase(buses, lines, gens, wind, loads, storage, name="case6")


DEMO_CASES = {"case3": desk_case, "case6": six_bus_case}


def random_desk_case(seed: int, n_buses: int = 3, budget: float | None = None) -> NetworkCase:
    """Seeded small system for bulk checks: a random spanning tree plus a spare line,
    two units, one wind farm, two or three loads and one or two storage candidates."""
    from .scenarios import stream_rng

    if not 3 <= n_buses <= 9:
        raise ValueError("n_buses must lie in [3, 9]")
    rng = stream_rng(seed, (9, n_buses))
    buses = tuple(Bus(i, str(i + 1)) for i in range(n_buses))
    pairs = [(int(rng.integers(0, i)), i) for i in range(1, n_buses)]
    extra = [(a, b) for a in range(n_buses) for b in range(a + 1, n_buses) if (a, b) not in pairs]
    pairs.append(extra[int(rng.integers(0, len(extra)))])
    lines = tuple(
        Line(j, a, b, round(float(rng.uniform(0.05, 0.3)), 4), -(lim := round(float(rng.uniform(40, 120)), 1)), lim)
        for j, (a, b) in enumerate(pairs)
    )
    load_buses = sorted(rng.choice(np.arange(1, n_buses), size=min(n_buses - 1, int(rng.integers(2, 4))),
                                   replace=False).tolist())
    loads = tuple(LoadPoint(int(b), round(float(rng.uniform(40, 100)), 1), SHED_COST) for b in load_buses)
    peak = sum(ld.peak for ld in loads)
    share = float(rng.uniform(0.55, 0.75))
    cap = [round(peak * share, 1), round(peak * float(rng.uniform(0.15, 0.35)), 1)]
    second_bus = int(rng.integers(1, n_buses))
    gens = (
        Generator(0, 0, 0.0, cap[0], round(cap[0] * 0.35, 1), round(cap[0] * 0.35, 1),
                  round(float(rng.uniform(15, 30)), 2)),
        Generator(1, second_bus, 0.0, cap[1], round(cap[1] * 0.5, 1), round(cap[1] * 0.5, 1),
                  round(float(rng.uniform(40, 80)), 2)),
    )
    wind = (WindFarm(0, int(rng.integers(1, n_buses)), round(peak * float(rng.uniform(0.3, 0.6)), 1)),)
    n_cand = int(rng.integers(1, 3))
    cands = tuple(sorted(int(b) for b in rng.choice(np.arange(n_buses), size=n_cand, replace=False)))
    if budget is None:
        budget = float(rng.choice([0.8e6, 1.5e6, 2.5e6]))
    storage = table2_storage(cands, budget)
    return NetworkCase(buses, lines, gens, wind, loads, storage, name=f"desk-{n_buses}-{seed}")


def two_pocket_case(budget: float = 3e6) -> NetworkCase:
    """Hub bus with cheap generation feeding two load pockets over weak lines.

    Each pocket can only ride through its evening peak with storage on its own
    bus, so a day peaking in one pocket and a day peaking in the other bind the
    plan jointly.
    """
    buses = (Bus(0, "hub"), Bus(1, "east"), Bus(2, "west"))
    lines = (Line(0, 0, 1, 0.1, -40.0, 40.0), Line(1, 0, 2, 0.1, -40.0, 40.0))
    gens = (Generator(0, 0, 0.0, 200.0, 200.0, 200.0, 20.0),)
    loads = (LoadPoint(1, 60.0, SHED_COST), LoadPoint(2, 60.0, SHED_COST))
    return NetworkCase(buses, lines, gens, (), loads, table2_storage((1, 2), budget), name="two-pocket")


def two_pocket_days():
    """(east peak, west peak, quiet day) for ``two_pocket_case``."""
    from .scenarios import DailyScenario

    quiet = np.full(24, 0.4)
    peak = quiet.copy()
    peak[17:21] = 1.0
    none = np.zeros((0, 24))
    hub = np.zeros(24)
    east = DailyScenario(np.stack([hub, peak, quiet]), none)
    west = DailyScenario(np.stack([hub, quiet, peak]), none)
    calm = DailyScenario(np.stack([hub, quiet, quiet]), none)
    return east, west, calm
