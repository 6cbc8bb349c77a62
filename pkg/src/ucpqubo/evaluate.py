"""Solution judging independent of the QUBO, and an exact commitment oracle.

Feasibility is checked on the decoded schedule from first principles (run
lengths, output ranges, start events); the true cost ignores every penalty
weight. The oracle enumerates commitment patterns and power levels directly
and is used as ground truth for small instances.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .builder import HARD_TERMS, PenaltyWeights, penalty_breakdown, tune_penalties
from .layout import Schedule, decode, encode, layout_for, schedule_from_levels, starts_from_on
from .model import DeterministicInstance, Instance, StochasticInstance, effective_demand
from .stochastic import (
    expected_effective_demand,
    relaxed_penalty_breakdown,
    scenario_from_indices,
    tune_all_relaxed,
)

ORACLE_MAX_COMMITMENT_BITS = 16
ORACLE_MAX_POWER_BITS = 24
ORACLE_MAX_SCENARIO_PATHS = 100_000


# -- feasibility --------------------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityReport:
    """Constraint check of one schedule.

    ``feasible`` depends only on the hard counts (plus ``one_hot_violations`` for
    relaxed solutions, and the demand mismatch when ``demand_is_hard`` was set).
    """

    demand_mismatch: tuple
    max_mismatch: float
    demand_tol: float
    minup_violations: int
    mindown_violations: int
    interlock_violations: int
    start_link_violations: int
    one_hot_violations: int = 0
    demand_is_hard: bool = False

    @property
    def hard_violations(self) -> int:
        return (
            self.minup_violations
            + self.mindown_violations
            + self.interlock_violations
            + self.start_link_violations
            + self.one_hot_violations
        )

    @property
    def demand_met(self) -> bool:
        return self.max_mismatch <= self.demand_tol

    @property
    def feasible(self) -> bool:
        return self.hard_violations == 0 and (self.demand_met or not self.demand_is_hard)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "demand_mismatch": list(self.demand_mismatch),
            "max_mismatch": self.max_mismatch,
            "demand_tol": self.demand_tol,
            "minup_violations": self.minup_violations,
            "mindown_violations": self.mindown_violations,
            "interlock_violations": self.interlock_violations,
            "start_link_violations": self.start_link_violations,
            "one_hot_violations": self.one_hot_violations,
        }


def default_demand_tol(inst: Instance) -> float:
    """Half of the finest power-grid step over all units."""
    steps = [inst.discretization.step(k) for k in range(inst.N)]
    positive = [s for s in steps if s > 0]
    return 0.5 * min(positive) if positive else 1e-9


def _target_demand(inst: Instance, schedule: Schedule) -> np.ndarray:
    if isinstance(inst, StochasticInstance):
        if schedule.demand_choice is None:
            return expected_effective_demand(inst)
        scenario = scenario_from_indices(inst, schedule.demand_choice, schedule.renewable_choice)
        return scenario.effective_demand
    return effective_demand(inst)


def _run_violations(on: np.ndarray, minimum: int, value: bool) -> int:
    """Runs of ``value`` that begin inside the horizon and end too early.

    A run entered at ``t`` must last ``min(minimum, T - t)`` steps; runs of the
    off state only count once the unit has been on (the pre-horizon state is off,
    so a leading off run is not a shutdown).
    """
    T = on.size
    count = 0
    for t in range(T):
        prev = bool(on[t - 1]) if t > 0 else False
        if bool(on[t]) != value or prev == value:
            continue
        if not value and t == 0:
            continue
        need = min(int(minimum), T - t)
        length = 0
        while t + length < T and bool(on[t + length]) == value:
            length += 1
        if length < need:
            count += 1
    return count


def check_feasibility(
    schedule: Schedule,
    inst: Instance,
    demand_tol: Optional[float] = None,
    demand_is_hard: bool = False,
) -> FeasibilityReport:
    """Count constraint violations of a decoded schedule.

    * minup: starts whose on-run is shorter than ``min(minup, T - t)``
    * mindown: shutdowns whose off-run is shorter than ``min(mindown, T - t)``
    * interlock: output while off, or output outside ``[mingen, maxgen]`` while on
    * start link: start flags that differ from the off-to-on transitions
    * one hot (relaxed): demand or renewable blocks without exactly one bit
    """
    on = np.asarray(schedule.on, dtype=bool)
    if on.shape != (inst.T, inst.N):
        raise ValueError(f"schedule shape {on.shape} differs from instance ({inst.T}, {inst.N})")
    gen = np.asarray(schedule.gen, dtype=float)
    tol = demand_tol if demand_tol is not None else default_demand_tol(inst)

    minup = mindown = interlock = 0
    for k, unit in enumerate(inst.units):
        minup += _run_violations(on[:, k], unit.minup, True)
        mindown += _run_violations(on[:, k], unit.mindown, False)
        slack = 1e-9 * max(1.0, abs(unit.maxgen))
        for t in range(inst.T):
            if on[t, k]:
                interlock += int(gen[t, k] < unit.mingen - slack or gen[t, k] > unit.maxgen + slack)
            else:
                interlock += int(abs(gen[t, k]) > slack)
    start_link = int(np.sum(np.asarray(schedule.start, dtype=bool) != starts_from_on(on)))

    one_hot = 0
    if isinstance(inst, StochasticInstance) and schedule.demand_choice is not None:
        one_hot = int(bool(schedule.malformed))
    mismatch = np.abs(gen.sum(axis=1) - _target_demand(inst, schedule))
    return FeasibilityReport(
        tuple(float(m) for m in mismatch),
        float(mismatch.max()) if mismatch.size else 0.0,
        float(tol),
        minup,
        mindown,
        interlock,
        start_link,
        one_hot,
        demand_is_hard,
    )


def check_assignment(x, inst: Instance, demand_tol: Optional[float] = None, demand_is_hard: bool = False):
    """Decode a bit vector and check it, counting set power bits of off units as interlock violations.

    Decoding alone cannot see power bits of a unit whose grid step is zero.
    """
    layout = layout_for(inst)
    x = np.asarray(x).astype(np.int8)
    schedule = decode(x, layout, inst)
    report = check_feasibility(schedule, inst, demand_tol, demand_is_hard)
    bits = x[layout.power_indices()]  # (T, N, B)
    hidden = int(np.sum(bits.any(axis=2) & ~schedule.on & (np.abs(schedule.gen) <= 1e-12)))
    if isinstance(inst, StochasticInstance):
        blocks = [x[layout.demand_indices()[t]].sum() for t in range(layout.T)]
        blocks += [x[layout.renewable_indices()[t, r]].sum() for t in range(layout.T) for r in range(layout.R)]
        report = _replace(report, one_hot_violations=int(sum(b != 1 for b in blocks)))
    if hidden:
        report = _replace(report, interlock_violations=report.interlock_violations + hidden)
    return schedule, report


def _replace(report: FeasibilityReport, **changes) -> FeasibilityReport:
    return dataclasses.replace(report, **changes)


# -- cost and score -----------------------------------------------------------------


def schedule_cost(schedule: Schedule, inst: Instance) -> float:
    """True economic cost: variable cost of every output plus start costs of start events."""
    on = np.asarray(schedule.on, dtype=bool)
    gen = np.asarray(schedule.gen, dtype=float)
    starts = starts_from_on(on)
    total = []
    for k, unit in enumerate(inst.units):
        total.append(unit.varcost * math.fsum(gen[:, k]))
        total.append(unit.startcost * int(starts[:, k].sum()))
    return math.fsum(total)


def score(nu_bar: float, cost: float, c_min: float, nu_crit: float = 0.0) -> float:
    """Solution quality ``f``: a violation-rate factor times ``1 - |c - c_min| / c_min``.

    With ``nu_crit = 0`` the factor is a step function (1 only when no run
    violated a hard constraint); otherwise it is
    ``exp(-nu/nu_crit) - nu * exp(-1/nu_crit)``. The result is not clamped.
    """
    if c_min <= 0:
        raise ValueError("c_min must be positive")
    if not 0.0 <= nu_bar <= 1.0 or not 0.0 <= nu_crit <= 1.0:
        raise ValueError("nu_bar and nu_crit must lie in [0, 1]")
    quality = 1.0 - abs(cost - c_min) / c_min
    if nu_crit == 0.0:
        factor = 1.0 if -nu_bar >= 0.0 else 0.0
    else:
        factor = math.exp(-nu_bar / nu_crit) - nu_bar * math.exp(-1.0 / nu_crit)
    return factor * quality


# -- exact oracle -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OracleResult:
    schedule: Schedule
    assignment: np.ndarray
    energy: float
    cost: float
    weights: PenaltyWeights
    patterns: int
    scenario: Optional[object] = None

    def to_dict(self) -> dict:
        out = {
            "energy": self.energy,
            "cost": self.cost,
            "patterns": self.patterns,
            "schedule": self.schedule.to_dict(),
        }
        if self.scenario is not None:
            out["scenario"] = self.scenario.to_dict()
        return out


def commitment_patterns(inst: Instance) -> list[np.ndarray]:
    """All ``(T, N)`` on/off patterns satisfying the minup/mindown run-length rules."""
    T = inst.T
    per_unit = []
    for unit in inst.units:
        good = []
        for bits in itertools.product((False, True), repeat=T):
            col = np.array(bits, dtype=bool)
            if _run_violations(col, unit.minup, True) == 0 and _run_violations(col, unit.mindown, False) == 0:
                good.append(col)
        per_unit.append(good)
    return [np.stack(cols, axis=1) for cols in itertools.product(*per_unit)]


class _LevelTable:
    """Every power-level combination of a set of committed units, sorted by output."""

    def __init__(self, inst: Instance, subset: tuple):
        B = inst.B
        weights = inst.discretization.weights
        bits = ((np.arange(2**B)[:, None] >> np.arange(B)) & 1).astype(float)
        gen = np.zeros(1)
        kappa = np.zeros(1)
        code = np.zeros(1, dtype=np.int64)
        for k in subset:
            unit = inst.units[k]
            g = unit.mingen + bits @ np.asarray(weights[k], dtype=float)
            gen = np.add.outer(gen, g).ravel()
            kappa = np.add.outer(kappa, unit.varcost * g).ravel()
            code = np.add.outer(code * 2**B, np.arange(2**B)).ravel()
        order = np.argsort(gen, kind="stable")
        self.subset = subset
        self.gen = gen[order]
        self.kappa = kappa[order]
        self.code = code[order]
        self.B = B

    def nearest(self, demand: float) -> int:
        """Position of the output closest to ``demand`` (cheapest on ties)."""
        pos = int(np.searchsorted(self.gen, demand))
        lo, hi = max(pos - 1, 0), min(pos + 1, self.gen.size)
        cand = np.arange(lo, hi)
        dist = np.abs(self.gen[cand] - demand)
        best = cand[dist == dist.min()]
        return int(best[np.argmin(self.kappa[best])])

    def window(self, demand: float, radius: float) -> np.ndarray:
        lo = np.searchsorted(self.gen, demand - radius, side="left")
        hi = np.searchsorted(self.gen, demand + radius, side="right")
        return np.arange(lo, hi)

    def levels(self, pos: int) -> dict:
        code = int(self.code[pos])
        out = {}
        for k in reversed(self.subset):
            code, out[k] = divmod(code, 2**self.B)
        return out


@dataclass
class _Option:
    """One value of the demand to be matched at one timestep."""

    demand: float
    deviation: float
    choice: tuple  # (demand index, renewable indices) or () when deterministic


def _options(inst: Instance) -> list[list[_Option]]:
    if isinstance(inst, DeterministicInstance):
        return [[_Option(float(d), 0.0, ())] for d in effective_demand(inst)]
    mean = expected_effective_demand(inst)
    out = []
    for t in range(inst.T):
        seen: dict = {}
        ranges = [range(len(inst.demand_dist[t]))] + [range(len(s[t])) for s in inst.renewable_dist]
        for idx in itertools.product(*ranges):
            value = inst.demand_dist[t].values[idx[0]] - math.fsum(
                inst.renewable_dist[r][t].values[i] for r, i in enumerate(idx[1:])
            )
            seen.setdefault(float(value), idx)  # lowest index combination per value
        out.append([_Option(v, v - float(mean[t]), c) for v, c in sorted(seen.items())])
    return out


def oracle_bounds_problem(inst: Instance) -> Optional[str]:
    """Why the oracle refuses ``inst``, or ``None`` when it is within its enumeration bounds."""
    if inst.N * inst.T > ORACLE_MAX_COMMITMENT_BITS:
        return f"N*T={inst.N * inst.T} > {ORACLE_MAX_COMMITMENT_BITS}"
    if inst.N * inst.B > ORACLE_MAX_POWER_BITS:
        return f"N*B={inst.N * inst.B} > {ORACLE_MAX_POWER_BITS}"
    if isinstance(inst, StochasticInstance):
        paths = math.prod(len(o) for o in _options(inst))
        if paths > ORACLE_MAX_SCENARIO_PATHS:
            return f"{paths} distinct demand paths > {ORACLE_MAX_SCENARIO_PATHS}"
    return None


def exact_commitment_oracle(
    inst: Instance,
    weights: Optional[PenaltyWeights] = None,
    linear_cost: bool = False,
) -> OracleResult:
    """Minimum penalized energy over all constraint-respecting schedules.

    Enumerates every commitment pattern allowed by the run-length rules (start
    flags follow the transitions, so the hard terms vanish) and, per pattern,
    every power level of the committed units and every demand choice of the
    relaxed model. The search is exact: an incumbent energy ``U`` restricts
    each timestep to outputs with ``Pdemand * mismatch**2 <= U``, per-timestep
    candidates are reduced to their (mismatch, cost) Pareto front, and a
    depth-first combination over timesteps prunes on lower bounds.
    """
    relaxed = isinstance(inst, StochasticInstance)
    problem = oracle_bounds_problem(inst)
    if problem:
        raise ValueError(f"oracle bounds exceeded: {problem}")
    if weights is None:
        weights = tune_all_relaxed(inst) if relaxed else tune_penalties(inst)
    Pcost, Pdem, Pvar = weights.Pcost, weights.Pdemand, (weights.Pvar if relaxed else 0.0)
    if Pdem <= 0 or Pcost < 0 or Pvar < 0:
        raise ValueError("oracle needs Pdemand > 0 and non-negative Pcost, Pvar")
    cost_fn: Callable[[float], float] = (lambda c: Pcost * c) if linear_cost else (lambda c: Pcost * c * c)
    startcost = np.array([u.startcost for u in inst.units], dtype=float)
    T = inst.T
    options = _options(inst)
    patterns = commitment_patterns(inst)
    tables: dict = {}

    def table(subset: tuple) -> _LevelTable:
        if subset not in tables:
            tables[subset] = _LevelTable(inst, subset)
        return tables[subset]

    subsets = [[tuple(np.flatnonzero(p[t])) for t in range(T)] for p in patterns]
    start_costs = [float(startcost @ starts_from_on(p).sum(axis=0)) for p in patterns]

    # incumbent: nearest output to the option closest to the expectation, per pattern
    best = (math.inf, None)
    for pi, p in enumerate(patterns):
        picks, kappa, mism, dev = [], start_costs[pi], 0.0, 0.0
        for t in range(T):
            opt = min(range(len(options[t])), key=lambda o: (abs(options[t][o].deviation), o))
            tab = table(subsets[pi][t])
            pos = tab.nearest(options[t][opt].demand)
            picks.append((opt, pos))
            kappa += tab.kappa[pos]
            mism += Pdem * (tab.gen[pos] - options[t][opt].demand) ** 2
            dev += options[t][opt].deviation
        energy = cost_fn(kappa) + mism + Pvar * dev * dev
        if energy < best[0]:
            best = (energy, (pi, picks))
    upper = best[0]
    radius = math.sqrt(upper / Pdem)

    # Pareto fronts of (weighted mismatch, cost) per (subset, option value)
    fronts: dict = {}

    def front(subset: tuple, demand: float):
        key = (subset, demand)
        if key not in fronts:
            tab = table(subset)
            pos = tab.window(demand, radius)
            m2 = Pdem * (tab.gen[pos] - demand) ** 2
            order = np.lexsort((m2, tab.kappa[pos]))
            keep, lowest = [], math.inf
            for j in order:
                if m2[j] < lowest:
                    keep.append(j)
                    lowest = m2[j]
            pos, m2 = pos[keep], m2[keep]
            fronts[key] = (pos, m2, tab.kappa[pos])
        return fronts[key]

    for pi, p in enumerate(patterns):
        # per timestep: list of (option index, positions, mismatch terms, costs)
        levels = []
        for t in range(T):
            entries = []
            for o, opt in enumerate(options[t]):
                pos, m2, kap = front(subsets[pi][t], opt.demand)
                if pos.size:
                    entries.append((o, pos, m2, kap))
            levels.append(entries)
        if any(not e for e in levels):
            continue
        min_m2 = [min(float(e[2].min()) for e in lv) for lv in levels]
        min_kap = [min(float(e[3].min()) for e in lv) for lv in levels]
        dev_lo = [min(options[t][e[0]].deviation for e in levels[t]) for t in range(T)]
        dev_hi = [max(options[t][e[0]].deviation for e in levels[t]) for t in range(T)]
        rest_m2 = np.concatenate([np.cumsum(min_m2[::-1])[::-1], [0.0]])
        rest_kap = np.concatenate([np.cumsum(min_kap[::-1])[::-1], [0.0]])
        rest_lo = np.concatenate([np.cumsum(dev_lo[::-1])[::-1], [0.0]])
        rest_hi = np.concatenate([np.cumsum(dev_hi[::-1])[::-1], [0.0]])

        def bound(t, kappa, m2, dev):
            lo, hi = dev + rest_lo[t], dev + rest_hi[t]
            var = 0.0 if lo <= 0.0 <= hi else min(lo * lo, hi * hi)
            return cost_fn(kappa + rest_kap[t]) + m2 + rest_m2[t] + Pvar * var

        picks = [None] * T

        def search(t, kappa, m2, dev):
            nonlocal upper, best
            if t == T:
                energy = cost_fn(kappa) + m2 + Pvar * dev * dev
                if energy < upper:
                    upper = energy
                    best = (energy, (pi, list(picks)))
                return
            for o, pos, m2s, kaps in levels[t]:
                d_dev = dev + options[t][o].deviation
                for j in range(pos.size):
                    nk, nm = kappa + kaps[j], m2 + m2s[j]
                    if bound(t + 1, nk, nm, d_dev) >= upper:
                        continue
                    picks[t] = (o, int(pos[j]))
                    search(t + 1, nk, nm, d_dev)

        if bound(0, start_costs[pi], 0.0, 0.0) < upper:
            search(0, start_costs[pi], 0.0, 0.0)

    _, (pi, picks) = best
    pattern = patterns[pi]
    level_grid = np.zeros((T, inst.N), dtype=np.int64)
    for t, (o, pos) in enumerate(picks):
        for k, lev in table(subsets[pi][t]).levels(pos).items():
            level_grid[t, k] = lev
    demand_choice = renewable_choice = None
    if relaxed:
        demand_choice = [options[t][o].choice[0] for t, (o, _) in enumerate(picks)]
        renewable_choice = [list(options[t][o].choice[1:]) for t, (o, _) in enumerate(picks)]
    schedule = schedule_from_levels(inst, pattern, level_grid, demand_choice, renewable_choice)
    layout = layout_for(inst)
    x = encode(schedule, layout, inst)
    schedule = decode(x, layout, inst)
    if relaxed:
        energy = relaxed_penalty_breakdown(inst, weights, x, linear_cost)["total"]
        scenario = scenario_from_indices(inst, demand_choice, renewable_choice)
    else:
        energy = penalty_breakdown(inst, weights, x, linear_cost)["total"]
        scenario = None
    return OracleResult(schedule, x, float(energy), schedule_cost(schedule, inst), weights, len(patterns), scenario)


# -- solve reports and violation rate --------------------------------------------------


@dataclass(frozen=True, eq=False)
class SolveReport:
    assignment: np.ndarray
    schedule: Schedule
    energy: float
    cost: float
    feasibility: FeasibilityReport
    wall_time: float
    seed: int
    solver: dict = field(default_factory=dict)
    scenario: Optional[object] = None

    @property
    def feasible(self) -> bool:
        return self.feasibility.feasible

    def to_dict(self, include_wall_time: bool = True) -> dict:
        out = {
            "seed": self.seed,
            "energy": self.energy,
            "cost": self.cost,
            "feasible": self.feasible,
            "mismatch": self.feasibility.max_mismatch,
            "feasibility": self.feasibility.to_dict(),
            "schedule": self.schedule.to_dict(),
            "assignment": "".join(str(int(b)) for b in self.assignment),
            "solver": self.solver,
        }
        if self.scenario is not None:
            out["scenario"] = self.scenario.to_dict()
        if include_wall_time:
            out["wall_time_s"] = self.wall_time
        return out


def report_assignment(
    x,
    inst: Instance,
    energy: float,
    wall_time: float = 0.0,
    seed: int = 0,
    solver: Optional[dict] = None,
    demand_tol: Optional[float] = None,
    demand_is_hard: bool = False,
) -> SolveReport:
    """Judge a solver's bit vector: decode, check, compute the true cost."""
    schedule, feasibility = check_assignment(x, inst, demand_tol, demand_is_hard)
    scenario = None
    if isinstance(inst, StochasticInstance):
        scenario = scenario_from_indices(inst, schedule.demand_choice, schedule.renewable_choice, schedule.malformed)
    return SolveReport(
        np.asarray(x, dtype=np.int8),
        schedule,
        float(energy),
        schedule_cost(schedule, inst),
        feasibility,
        float(wall_time),
        int(seed),
        dict(solver or {}),
        scenario,
    )


@dataclass(frozen=True, eq=False)
class ViolationEstimate:
    nu_bar: float
    runs: tuple

    @property
    def mean_cost(self) -> float:
        return math.fsum(r.cost for r in self.runs) / len(self.runs)


def estimate_violation_rate(
    inst: Instance,
    solver: Callable[[int], tuple],
    runs: int = 10,
    seed: int = 0,
    demand_tol: Optional[float] = None,
    demand_is_hard: bool = False,
    seeds: Optional[Sequence[int]] = None,
) -> ViolationEstimate:
    """Fraction of independent runs whose best solution violates a hard constraint.

    ``solver(run_seed)`` returns ``(assignment, energy)``; run ``i`` uses
    ``seeds[i]`` when given, else a seed derived from ``(seed, i)``.
    """
    from .solve import derive_seed

    if runs < 1:
        raise ValueError("runs must be at least 1")
    if seeds is None:
        seeds = [derive_seed(seed, i) for i in range(runs)]
    elif len(seeds) != runs:
        raise ValueError("need one seed per run")
    reports = []
    for run_seed in seeds:
        began = time.perf_counter()
        x, energy = solver(int(run_seed))
        elapsed = time.perf_counter() - began
        reports.append(report_assignment(x, inst, energy, elapsed, int(run_seed), None, demand_tol, demand_is_hard))
    nu_bar = sum(not r.feasible for r in reports) / runs
    return ViolationEstimate(nu_bar, tuple(reports))


__all__ = [
    "FeasibilityReport",
    "OracleResult",
    "SolveReport",
    "ViolationEstimate",
    "HARD_TERMS",
    "check_assignment",
    "check_feasibility",
    "commitment_patterns",
    "default_demand_tol",
    "oracle_bounds_problem",
    "estimate_violation_rate",
    "exact_commitment_oracle",
    "report_assignment",
    "schedule_cost",
    "score",
]
