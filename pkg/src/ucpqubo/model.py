"""Problem instances for the single-bus unit commitment problem.

A deterministic instance fixes demand and renewable supply per timestep; a
stochastic instance replaces both with discrete distributions. Power output of
each conventional unit is discretized with ``B`` binary weights spanning
``[mingen, maxgen]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence, Union

import numpy as np

MAX_BITS = 30
PROB_TOL = 1e-9


@dataclass(frozen=True)
class UnitSpec:
    """Economic and technical parameters of one conventional generator."""

    varcost: float
    startcost: float
    mingen: float
    maxgen: float
    minup: int = 1
    mindown: int = 1

    @property
    def span(self) -> float:
        return self.maxgen - self.mingen

    def to_dict(self) -> dict:
        return {
            "varcost": self.varcost,
            "startcost": self.startcost,
            "mingen": self.mingen,
            "maxgen": self.maxgen,
            "minup": self.minup,
            "mindown": self.mindown,
        }


def discretize(mingen: float, maxgen: float, B: int) -> np.ndarray:
    """Binary power weights ``2**b * (maxgen - mingen) / (2**B - 1)``, lowest bit first."""
    if B < 1 or B > MAX_BITS:
        raise ValueError(f"resolution B must be in [1, {MAX_BITS}], got {B}")
    if mingen > maxgen:
        raise ValueError(f"mingen {mingen} exceeds maxgen {maxgen}")
    span = float(maxgen) - float(mingen)
    return np.array([2.0**b * span / (2.0**B - 1.0) for b in range(B)])


def fineness(B: int) -> float:
    """Relative grid spacing ``F(B) / (y - x) = 1 / (2**B - 1)``."""
    if B < 1:
        raise ValueError("B must be at least 1")
    return 1.0 / (2.0**B - 1.0)


def realizations(B: int) -> int:
    """Number of distinct power levels representable with ``B`` bits."""
    if B < 1:
        raise ValueError("B must be at least 1")
    return 2**B


@dataclass(frozen=True)
class Discretization:
    B: int
    weights: tuple[np.ndarray, ...]

    @classmethod
    def for_units(cls, units: Sequence[UnitSpec], B: int) -> "Discretization":
        return cls(B, tuple(discretize(u.mingen, u.maxgen, B) for u in units))

    def step(self, k: int) -> float:
        """Grid spacing of unit ``k`` (its smallest weight)."""
        return float(self.weights[k][0])

    def min_weight(self) -> float:
        return min(float(w[0]) for w in self.weights)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution over power values at a single timestep."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls((value,), (1.0,))

    def __len__(self) -> int:
        return len(self.values)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    def normalized(self) -> "DiscreteDistribution":
        total = math.fsum(self.probs)
        return DiscreteDistribution(self.values, tuple(p / total for p in self.probs))

    def to_dict(self) -> dict:
        return {"values": list(self.values), "probs": list(self.probs)}


def _as_units(units) -> tuple[UnitSpec, ...]:
    return tuple(u if isinstance(u, UnitSpec) else UnitSpec(**u) for u in units)


@dataclass(frozen=True)
class DeterministicInstance:
    """Units, fixed demand series and fixed renewable supply series."""

    units: tuple[UnitSpec, ...]
    demand: tuple[float, ...]
    renewables: tuple[tuple[float, ...], ...] = ()
    B: int = 10
    T: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "units", _as_units(self.units))
        object.__setattr__(self, "demand", tuple(float(v) for v in self.demand))
        object.__setattr__(
            self, "renewables", tuple(tuple(float(v) for v in r) for r in self.renewables)
        )
        if self.T < 0:
            object.__setattr__(self, "T", len(self.demand))

    @property
    def N(self) -> int:
        return len(self.units)

    @property
    def R(self) -> int:
        return len(self.renewables)

    @cached_property
    def discretization(self) -> Discretization:
        return Discretization.for_units(self.units, self.B)

    def effective_demand(self) -> np.ndarray:
        return effective_demand(self)

    def with_resolution(self, B: int) -> "DeterministicInstance":
        return DeterministicInstance(self.units, self.demand, self.renewables, B, self.T)

    def to_dict(self) -> dict:
        return {
            "units": [u.to_dict() for u in self.units],
            "T": self.T,
            "B": self.B,
            "demand": list(self.demand),
            "renewables": [list(r) for r in self.renewables],
        }


@dataclass(frozen=True)
class StochasticInstance:
    """Units plus per-timestep distributions of demand and renewable supply.

    ``renewable_dist[r][t]`` is the distribution of renewable unit ``r`` at
    timestep ``t``; ``demand_dist[t]`` is the demand distribution.
    """

    units: tuple[UnitSpec, ...]
    demand_dist: tuple[DiscreteDistribution, ...]
    renewable_dist: tuple[tuple[DiscreteDistribution, ...], ...] = ()
    B: int = 10
    T: int = field(default=-1)

    def __post_init__(self):
        object.__setattr__(self, "units", _as_units(self.units))
        object.__setattr__(self, "demand_dist", tuple(self.demand_dist))
        object.__setattr__(self, "renewable_dist", tuple(tuple(r) for r in self.renewable_dist))
        if self.T < 0:
            object.__setattr__(self, "T", len(self.demand_dist))

    @property
    def N(self) -> int:
        return len(self.units)

    @property
    def R(self) -> int:
        return len(self.renewable_dist)

    @property
    def n_D(self) -> int:
        return len(self.demand_dist[0]) if self.demand_dist else 0

    @property
    def n_R(self) -> int:
        return len(self.renewable_dist[0][0]) if self.renewable_dist else 0

    @cached_property
    def discretization(self) -> Discretization:
        return Discretization.for_units(self.units, self.B)

    def expected_instance(self) -> DeterministicInstance:
        """Deterministic instance whose demand and supply are the expectations."""
        return DeterministicInstance(
            self.units,
            [dist.mean() for dist in self.demand_dist],
            [[dist.mean() for dist in r] for r in self.renewable_dist],
            self.B,
            self.T,
        )

    def normalized(self) -> "StochasticInstance":
        return StochasticInstance(
            self.units,
            [dist.normalized() for dist in self.demand_dist],
            [[dist.normalized() for dist in r] for r in self.renewable_dist],
            self.B,
            self.T,
        )

    def with_resolution(self, B: int) -> "StochasticInstance":
        return StochasticInstance(self.units, self.demand_dist, self.renewable_dist, B, self.T)

    def to_dict(self) -> dict:
        return {
            "units": [u.to_dict() for u in self.units],
            "T": self.T,
            "B": self.B,
            "demand_dist": [dist.to_dict() for dist in self.demand_dist],
            "renewable_dist": [[dist.to_dict() for dist in r] for r in self.renewable_dist],
        }


Instance = Union[DeterministicInstance, StochasticInstance]


def effective_demand(inst: DeterministicInstance) -> np.ndarray:
    """Residual demand ``demand(t) - sum_r supply_r(t)`` left for conventional units."""
    d = np.asarray(inst.demand, dtype=float).copy()
    for supply in inst.renewables:
        d -= np.asarray(supply, dtype=float)
    return d


@dataclass(frozen=True)
class Finding:
    level: str  # "error" or "warning"
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


def _check_units(units: Sequence[UnitSpec], findings: list[Finding]) -> None:
    if not units:
        findings.append(Finding("error", "instance has no units"))
    for k, u in enumerate(units):
        tag = f"unit {k}"
        if min(u.varcost, u.startcost) < 0:
            findings.append(Finding("error", f"{tag}: negative cost"))
        if u.mingen < 0:
            findings.append(Finding("error", f"{tag}: mingen below 0"))
        if u.mingen > u.maxgen:
            findings.append(Finding("error", f"{tag}: mingen exceeds maxgen"))
        for name in ("minup", "mindown"):
            value = getattr(u, name)
            if int(value) != value:
                findings.append(Finding("error", f"{tag}: {name} not an integer"))
            elif value < 1:
                findings.append(Finding("error", f"{tag}: {name} below 1"))


def _check_common(inst: Instance, findings: list[Finding]) -> None:
    _check_units(inst.units, findings)
    if inst.T < 1:
        findings.append(Finding("error", "T below 1"))
    if not 1 <= inst.B <= MAX_BITS:
        findings.append(Finding("error", f"resolution B outside [1, {MAX_BITS}]"))


def _check_distribution(dist: DiscreteDistribution, tag: str, findings: list[Finding]) -> None:
    if len(dist.values) != len(dist.probs):
        findings.append(Finding("error", f"{tag}: values and probs differ in length"))
        return
    if len(dist) == 0:
        findings.append(Finding("error", f"{tag}: empty distribution"))
        return
    if any(p < 0 for p in dist.probs):
        findings.append(Finding("error", f"{tag}: negative probability"))
    if abs(math.fsum(dist.probs) - 1.0) > PROB_TOL:
        findings.append(Finding("error", f"{tag}: distribution not normalized"))
    if any(v < 0 for v in dist.values):
        findings.append(Finding("error", f"{tag}: negative value"))


def validate(inst: Instance) -> list[Finding]:
    """Return all invariant violations (errors) and warnings; empty means clean."""
    findings: list[Finding] = []
    _check_common(inst, findings)
    if isinstance(inst, DeterministicInstance):
        if len(inst.demand) != inst.T:
            findings.append(Finding("error", "demand length differs from T"))
        for r, supply in enumerate(inst.renewables):
            if len(supply) != inst.T:
                findings.append(Finding("error", f"renewable {r}: length differs from T"))
        if any(v < 0 for v in inst.demand):
            findings.append(Finding("error", "negative demand"))
        if any(v < 0 for r in inst.renewables for v in r):
            findings.append(Finding("error", "negative renewable supply"))
        if not any(f.level == "error" for f in findings):
            d = effective_demand(inst)
            for t in np.flatnonzero(d < 0):
                findings.append(Finding("warning", f"t={t}: negative effective demand {d[t]:g}"))
    else:
        if len(inst.demand_dist) != inst.T:
            findings.append(Finding("error", "demand_dist length differs from T"))
        for t, dist in enumerate(inst.demand_dist):
            _check_distribution(dist, f"demand t={t}", findings)
        if len({len(dist) for dist in inst.demand_dist}) > 1:
            findings.append(Finding("error", "demand distributions have ragged sizes (n_D varies)"))
        sizes = set()
        for r, series in enumerate(inst.renewable_dist):
            if len(series) != inst.T:
                findings.append(Finding("error", f"renewable {r}: length differs from T"))
            for t, dist in enumerate(series):
                _check_distribution(dist, f"renewable {r} t={t}", findings)
                sizes.add(len(dist))
        if len(sizes) > 1:
            findings.append(Finding("error", "renewable distributions have ragged sizes (n_R varies)"))
    return findings


def is_valid(inst: Instance) -> bool:
    return not any(f.level == "error" for f in validate(inst))


# -- JSON -------------------------------------------------------------------------


def _dist(obj) -> DiscreteDistribution:
    return DiscreteDistribution(tuple(obj["values"]), tuple(obj["probs"]))


def instance_from_dict(data: dict, renormalize: bool = False) -> Instance:
    units = tuple(UnitSpec(**u) for u in data["units"])
    B = int(data.get("B", 10))
    if "demand_dist" in data:
        inst = StochasticInstance(
            units,
            [_dist(d) for d in data["demand_dist"]],
            [[_dist(d) for d in r] for r in data.get("renewable_dist", [])],
            B,
            int(data.get("T", len(data["demand_dist"]))),
        )
        return inst.normalized() if renormalize else inst
    if "demand" in data:
        return DeterministicInstance(
            units,
            data["demand"],
            data.get("renewables", []),
            B,
            int(data.get("T", len(data["demand"]))),
        )
    raise KeyError("instance needs either 'demand' or 'demand_dist'")


def load_instance(path: Union[str, Path], renormalize: bool = False) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh), renormalize=renormalize)


def save_instance(inst: Instance, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_dict(), fh, indent=2)
        fh.write("\n")


def instance_hash(inst: Instance) -> str:
    """Stable content hash of an instance (first 16 hex digits of sha256)."""
    import hashlib

    blob = json.dumps(inst.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
