"""Instance size ladder and benchmark harness.

Presets XXS and XS are the bundled reference instances; S and larger are
synthesized from a seed. Every benchmark point is deterministic given its seed;
only the wall-time column varies between repeated runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import instances
from .builder import build_qubo
from .evaluate import estimate_violation_rate, exact_commitment_oracle, oracle_bounds_problem, score
from .layout import VariableLayout
from .model import DeterministicInstance, DiscreteDistribution, Instance, StochasticInstance, UnitSpec, instance_hash
from .qubo import QuboMatrix
from .solve import BRUTE_FORCE_LIMIT, DEFAULT_SEED, AnnealParams, brute_force, derive_seed, simulated_anneal, thread_count
from .stochastic import build_qubo_relaxed

FORMAT_VERSION = 1
CSV_COLUMNS = (
    "preset",
    "formulation",
    "dim",
    "solver",
    "runs",
    "mean_f",
    "nu_bar",
    "mean_cost",
    "c_min",
    "mean_wall_ms",
    "seed",
)
SOLVERS = ("sa", "brute", "exact")

# generation ranges for synthesized units
VARCOST_RANGE = (10.0, 100.0)
STARTCOST_RANGE = (100.0, 1000.0)
MINGEN_RANGE = (20.0, 300.0)
SPAN_RANGE = (100.0, 800.0)
MIN_TIME_RANGE = (1, 4)
DEMAND_MARGIN = 1.3

# largest dimension whose matrix the harness assembles; larger points report
# build statistics only (the squared cost term couples every pair of bits)
MATERIALIZE_LIMIT = 2000


@dataclass(frozen=True)
class LadderPreset:
    name: str
    deterministic: tuple  # (N, T)
    relaxed: tuple  # (N, R, n_R, n_D, T)
    reference_relaxed_dim: Optional[int] = None
    seed: int = DEFAULT_SEED
    B: int = 10

    def deterministic_layout(self) -> VariableLayout:
        N, T = self.deterministic
        return VariableLayout(N, self.B, T)

    def relaxed_layout(self) -> VariableLayout:
        N, R, n_R, n_D, T = self.relaxed
        return VariableLayout(N, self.B, T, R, n_R, n_D)

    def dim(self, formulation: str = "deterministic") -> int:
        layout = self.relaxed_layout() if formulation == "relaxed" else self.deterministic_layout()
        return layout.dim


PRESETS = {
    p.name: p
    for p in (
        LadderPreset("XXS", (2, 1), (2, 2, 3, 3, 1), 33),
        LadderPreset("XS", (2, 3), (2, 2, 3, 3, 3), 99),
        LadderPreset("S", (2, 5), (2, 2, 3, 3, 5), 165),
        LadderPreset("M", (5, 24), (5, 3, 5, 5, 24), 1920),
        LadderPreset("L", (50, 24), (50, 50, 5, 5, 24), 9000),
        LadderPreset("XL", (500, 24), (500, 100, 20, 20, 24), 168240),
        LadderPreset("XXL", (5000, 24), (5000, 1000, 10, 10, 24), 1680240),
    )
}
LADDER = tuple(PRESETS)


def preset(name: str) -> LadderPreset:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(LADDER)}") from None


def _units(rng: np.random.Generator, N: int) -> list[UnitSpec]:
    units = []
    for _ in range(N):
        mingen = float(np.round(rng.uniform(*MINGEN_RANGE)))
        units.append(
            UnitSpec(
                varcost=float(np.round(rng.uniform(*VARCOST_RANGE))),
                startcost=float(np.round(rng.uniform(*STARTCOST_RANGE))),
                mingen=mingen,
                maxgen=mingen + float(np.round(rng.uniform(*SPAN_RANGE))),
                minup=int(rng.integers(MIN_TIME_RANGE[0], MIN_TIME_RANGE[1] + 1)),
                mindown=int(rng.integers(MIN_TIME_RANGE[0], MIN_TIME_RANGE[1] + 1)),
            )
        )
    return units


def _demand_profile(rng: np.random.Generator, units: Sequence[UnitSpec], T: int) -> np.ndarray:
    """Demand whose peak is covered by the total capacity with the configured margin."""
    peak = sum(u.maxgen for u in units) / DEMAND_MARGIN
    shape = rng.uniform(0.5, 1.0, T)
    return np.round(peak * shape / shape.max(), 1)


def generate_instance(name: str, seed: int = DEFAULT_SEED, formulation: str = "deterministic") -> Instance:
    """Instance of a ladder preset; XXS and XS are the bundled reference instances.

    Synthesized units draw varcost, startcost, mingen, maxgen - mingen and the
    minimum up/down times uniformly from the module ranges. Relaxed demand has
    ``n_D`` outcomes spread +-10% around the profile; each renewable series has
    ``n_R`` outcomes up to 10% of the peak divided over the renewables. Outcome
    probabilities are Dirichlet draws rounded so they sum to one.
    """
    p = preset(name)
    if formulation not in ("deterministic", "relaxed"):
        raise ValueError(f"unknown formulation {formulation!r}")
    if p.name in ("XXS", "XS"):
        key = p.name.lower() + ("-relaxed" if formulation == "relaxed" else "")
        return instances.BUNDLED[key]()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), LADDER.index(p.name)]))
    if formulation == "deterministic":
        N, T = p.deterministic
        units = _units(rng, N)
        return DeterministicInstance(units, _demand_profile(rng, units, T), (), p.B, T)
    N, R, n_R, n_D, T = p.relaxed
    units = _units(rng, N)
    base = _demand_profile(rng, units, T)
    demand = []
    for t in range(T):
        values = np.round(base[t] * np.linspace(0.9, 1.1, n_D) if n_D > 1 else [base[t]], 1)
        demand.append(_distribution(rng, values))
    share = 0.1 * float(base.max()) / max(R, 1)
    renewables = []
    for _ in range(R):
        series = []
        for _ in range(T):
            values = np.round(np.sort(rng.uniform(0.0, share, n_R)), 1)
            series.append(_distribution(rng, values))
        renewables.append(series)
    return StochasticInstance(units, demand, renewables, p.B, T)


def _distribution(rng: np.random.Generator, values) -> DiscreteDistribution:
    probs = np.round(rng.dirichlet(np.ones(len(values))), 6)
    probs[-1] = round(1.0 - float(probs[:-1].sum()), 6)
    if probs[-1] < 0:
        probs = np.full(len(values), 1.0 / len(values))
    return DiscreteDistribution(tuple(float(v) for v in values), tuple(float(q) for q in probs))


def build_statistics(p: LadderPreset, formulation: str) -> dict:
    """Closed-form size of a preset's matrix; ``nnz_bound`` counts the dense upper triangle."""
    dim = p.dim(formulation)
    out = {"dim": dim, "nnz_bound": dim * (dim + 1) // 2}
    if formulation == "relaxed":
        out["reference_dim"] = p.reference_relaxed_dim
    return out


@dataclass(frozen=True)
class SolverConfig:
    name: str = "sa"
    reads: int = 1000
    sweeps: int = 1000

    def __post_init__(self):
        if self.name not in SOLVERS:
            raise ValueError(f"unknown solver {self.name!r}; choose from {', '.join(SOLVERS)}")

    def to_dict(self) -> dict:
        return {"name": self.name, "reads": self.reads, "sweeps": self.sweeps}


def build_matrix(inst: Instance) -> QuboMatrix:
    if isinstance(inst, StochasticInstance):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return build_qubo_relaxed(inst)
    return build_qubo(inst)


def oracle_feasible(inst: Instance) -> bool:
    return oracle_bounds_problem(inst) is None


def _point(p: LadderPreset, formulation: str, solver: SolverConfig, runs: int, seed: int) -> dict:
    row = {c: "" for c in CSV_COLUMNS}
    row.update(preset=p.name, formulation=formulation, dim=p.dim(formulation), solver=solver.name, runs=runs, seed=seed)
    meta: dict = {"build": build_statistics(p, formulation)}
    if p.dim(formulation) > MATERIALIZE_LIMIT:
        meta["status"] = "build statistics only"
        return {"row": row, "meta": meta}
    inst = generate_instance(p.name, p.seed, formulation)
    q = build_matrix(inst)
    meta["build"].update(nnz=q.nnz, offset=q.offset, instance_hash=instance_hash(inst))
    problem = oracle_bounds_problem(inst)
    oracle = exact_commitment_oracle(inst) if problem is None else None
    c_min = oracle.cost if oracle is not None else None
    meta["c_min_source"] = "exact_commitment_oracle" if oracle is not None else f"unavailable ({problem})"

    if solver.name == "sa":
        def run(run_seed):
            result = simulated_anneal(q, AnnealParams(reads=solver.reads, sweeps=solver.sweeps, seed=run_seed, threads=1))
            return result.best, result.energy
    elif solver.name == "brute":
        if q.dim > BRUTE_FORCE_LIMIT:
            raise ValueError(f"dimension {q.dim} exceeds brute-force limit {BRUTE_FORCE_LIMIT}")

        def run(run_seed):
            result = brute_force(q)
            return result.best, result.energy
    else:
        if oracle is None:
            raise ValueError("instance exceeds exact oracle bounds")

        def run(run_seed):
            result = exact_commitment_oracle(inst)
            return result.assignment, result.energy

    estimate = estimate_violation_rate(inst, run, runs=runs, seed=seed)
    row.update(nu_bar=estimate.nu_bar, mean_cost=estimate.mean_cost)
    row["mean_wall_ms"] = 1e3 * math.fsum(r.wall_time for r in estimate.runs) / runs
    if c_min is not None:
        row["c_min"] = c_min
        row["mean_f"] = math.fsum(score(estimate.nu_bar, r.cost, c_min) for r in estimate.runs) / runs
    meta["runs"] = [r.to_dict(include_wall_time=False) | {"wall_time_s": r.wall_time} for r in estimate.runs]
    return {"row": row, "meta": meta}


def run_benchmark(
    presets: Sequence[str],
    solvers: Sequence[SolverConfig] = (SolverConfig(),),
    runs: int = 10,
    formulation: str = "deterministic",
    seed: int = DEFAULT_SEED,
    workers: Optional[int] = None,
) -> list[dict]:
    """One result per (preset, solver) point; failures are recorded and the sweep continues.

    Point ``i`` runs its repetitions with seeds derived from ``(seed, i)``.
    """
    points = [(preset(name), s) for name in presets for s in solvers]

    def work(item):
        i, (p, s) = item
        point_seed = derive_seed(seed, i)
        try:
            return _point(p, formulation, s, runs, point_seed)
        except Exception as exc:  # recorded per point
            row = {c: "" for c in CSV_COLUMNS}
            row.update(preset=p.name, formulation=formulation, dim=p.dim(formulation), solver=s.name, runs=runs, seed=point_seed)
            return {"row": row, "meta": {"error": f"{type(exc).__name__}: {exc}"}}

    n = thread_count(workers)
    if n > 1 and len(points) > 1:
        with ThreadPoolExecutor(n) as pool:
            return list(pool.map(work, enumerate(points)))
    return [work(item) for item in enumerate(points)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def results_csv(results: Sequence[dict], include_wall_time: bool = True) -> str:
    buf = io.StringIO()
    columns = [c for c in CSV_COLUMNS if include_wall_time or c != "mean_wall_ms"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in results:
        writer.writerow([_fmt(r["row"][c]) for c in columns])
    return buf.getvalue()


def results_json(results: Sequence[dict], include_wall_time: bool = True) -> str:
    rows = []
    for r in results:
        row = dict(r["row"])
        meta = json.loads(json.dumps(r["meta"]))
        if not include_wall_time:
            row.pop("mean_wall_ms", None)
            for run in meta.get("runs", []):
                run.pop("wall_time_s", None)
        rows.append({"row": row, "meta": meta})
    return json.dumps({"format_version": FORMAT_VERSION, "columns": list(CSV_COLUMNS), "points": rows}, indent=2, sort_keys=True)


__all__ = [
    "CSV_COLUMNS",
    "FORMAT_VERSION",
    "LADDER",
    "LadderPreset",
    "PRESETS",
    "SolverConfig",
    "build_statistics",
    "generate_instance",
    "preset",
    "results_csv",
    "results_json",
    "run_benchmark",
]
