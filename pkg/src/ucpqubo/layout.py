"""Flat bit layout of the solution vector and schedule encode/decode.

Per timestep the block is ``(power bits of unit 0 .. N-1, on bits, start bits)``
with power bits lowest weight first. Timestep blocks are concatenated. The
relaxed layout appends all renewable one-hot blocks ``x_RE(0..T-1)`` (unit-major
inside each timestep) and then all demand one-hot blocks ``e_D(0..T-1)``.
All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import Instance, StochasticInstance


@dataclass(frozen=True)
class VariableLayout:
    N: int
    B: int
    T: int
    R: int = 0
    n_R: int = 0
    n_D: int = 0

    def __post_init__(self):
        for name in ("N", "B", "T"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.relaxed and (self.n_D < 1 or (self.R > 0 and self.n_R < 1)):
            raise ValueError("relaxed layout needs n_D >= 1 and n_R >= 1 when R > 0")
        if min(self.R, self.n_R, self.n_D) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def relaxed(self) -> bool:
        return self.n_D > 0

    @property
    def block(self) -> int:
        return self.N * (self.B + 2)

    @property
    def deterministic_dim(self) -> int:
        return self.T * self.block

    @property
    def dim(self) -> int:
        return self.T * (self.block + self.R * self.n_R + self.n_D)

    def power(self, k: int, b: int, t: int) -> int:
        return t * self.block + k * self.B + b

    def on(self, k: int, t: int) -> int:
        return t * self.block + self.N * self.B + k

    def start(self, k: int, t: int) -> int:
        return t * self.block + self.N * self.B + self.N + k

    def renewable(self, r: int, i: int, t: int) -> int:
        return self.deterministic_dim + t * self.R * self.n_R + r * self.n_R + i

    def demand(self, j: int, t: int) -> int:
        return self.deterministic_dim + self.T * self.R * self.n_R + t * self.n_D + j

    def power_indices(self) -> np.ndarray:
        """Array of shape ``(T, N, B)``."""
        t, k, b = np.meshgrid(np.arange(self.T), np.arange(self.N), np.arange(self.B), indexing="ij")
        return t * self.block + k * self.B + b

    def on_indices(self) -> np.ndarray:
        """Array of shape ``(T, N)``."""
        t, k = np.meshgrid(np.arange(self.T), np.arange(self.N), indexing="ij")
        return t * self.block + self.N * self.B + k

    def start_indices(self) -> np.ndarray:
        return self.on_indices() + self.N

    def renewable_indices(self) -> np.ndarray:
        """Array of shape ``(T, R, n_R)``."""
        t, r, i = np.meshgrid(np.arange(self.T), np.arange(self.R), np.arange(self.n_R), indexing="ij")
        return self.deterministic_dim + t * self.R * self.n_R + r * self.n_R + i

    def demand_indices(self) -> np.ndarray:
        """Array of shape ``(T, n_D)``."""
        t, j = np.meshgrid(np.arange(self.T), np.arange(self.n_D), indexing="ij")
        return self.deterministic_dim + self.T * self.R * self.n_R + t * self.n_D + j

    def role(self, index: int) -> tuple:
        """Inverse index map: ``("power", k, b, t)``, ``("on", k, t)``, ``("start", k, t)``,
        ``("renewable", r, i, t)`` or ``("demand", j, t)``."""
        if not 0 <= index < self.dim:
            raise IndexError(index)
        if index < self.deterministic_dim:
            t, rest = divmod(index, self.block)
            if rest < self.N * self.B:
                k, b = divmod(rest, self.B)
                return ("power", k, b, t)
            rest -= self.N * self.B
            if rest < self.N:
                return ("on", rest, t)
            return ("start", rest - self.N, t)
        rest = index - self.deterministic_dim
        if rest < self.T * self.R * self.n_R:
            t, rest = divmod(rest, self.R * self.n_R)
            r, i = divmod(rest, self.n_R)
            return ("renewable", r, i, t)
        rest -= self.T * self.R * self.n_R
        t, j = divmod(rest, self.n_D)
        return ("demand", j, t)


def build_layout(N: int, B: int, T: int, R: int = 0, n_R: int = 0, n_D: int = 0) -> VariableLayout:
    return VariableLayout(N, B, T, R, n_R, n_D)


def layout_for(inst: Instance) -> VariableLayout:
    if isinstance(inst, StochasticInstance):
        return VariableLayout(inst.N, inst.B, inst.T, inst.R, inst.n_R, inst.n_D)
    return VariableLayout(inst.N, inst.B, inst.T)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Decoded schedule; arrays are indexed ``[t, k]``.

    For relaxed layouts ``demand_choice[t]`` and ``renewable_choice[t, r]`` hold
    the selected stage indices (``-1`` for an empty one-hot block) and
    ``malformed`` is set if any block does not have exactly one bit.
    """

    on: np.ndarray
    start: np.ndarray
    gen: np.ndarray
    demand_choice: Optional[np.ndarray] = None
    renewable_choice: Optional[np.ndarray] = None
    malformed: bool = False

    @property
    def T(self) -> int:
        return self.on.shape[0]

    @property
    def N(self) -> int:
        return self.on.shape[1]

    def total_gen(self) -> np.ndarray:
        return self.gen.sum(axis=1)

    def to_dict(self) -> dict:
        out = {
            "on": self.on.astype(int).tolist(),
            "start": self.start.astype(int).tolist(),
            "gen": self.gen.tolist(),
        }
        if self.demand_choice is not None:
            out["demand_choice"] = self.demand_choice.tolist()
            out["renewable_choice"] = self.renewable_choice.tolist()
            out["malformed"] = self.malformed
        return out


def starts_from_on(on: np.ndarray) -> np.ndarray:
    """Start events (off to on transitions) with the pre-horizon state off."""
    on = np.asarray(on, dtype=bool)
    prev = np.vstack([np.zeros((1, on.shape[1]), dtype=bool), on[:-1]])
    return on & ~prev


def _read_one_hot(bits: np.ndarray) -> tuple[int, bool]:
    """Index of the lowest set bit and whether the block is well formed."""
    set_bits = np.flatnonzero(bits)
    if set_bits.size == 0:
        return -1, False
    return int(set_bits[0]), set_bits.size == 1


def decode(assignment, layout: VariableLayout, inst: Instance) -> Schedule:
    x = np.asarray(assignment).astype(np.int8, copy=False)
    if x.shape != (layout.dim,):
        raise ValueError(f"assignment length {x.size} differs from layout dim {layout.dim}")
    weights = np.stack(inst.discretization.weights)  # (N, B)
    mingen = np.array([u.mingen for u in inst.units])
    xp = x[layout.power_indices()]  # (T, N, B)
    on = x[layout.on_indices()].astype(bool)
    start = x[layout.start_indices()].astype(bool)
    gen = mingen[None, :] * on + np.einsum("tkb,kb->tk", xp, weights)
    if not layout.relaxed:
        return Schedule(on, start, gen)
    malformed = False
    demand_choice = np.empty(layout.T, dtype=int)
    renewable_choice = np.empty((layout.T, layout.R), dtype=int)
    d_idx = layout.demand_indices()
    re_idx = layout.renewable_indices()
    for t in range(layout.T):
        demand_choice[t], ok = _read_one_hot(x[d_idx[t]])
        malformed |= not ok
        for r in range(layout.R):
            renewable_choice[t, r], ok = _read_one_hot(x[re_idx[t, r]])
            malformed |= not ok
    return Schedule(on, start, gen, demand_choice, renewable_choice, malformed)


def encode(schedule: Schedule, layout: VariableLayout, inst: Instance) -> np.ndarray:
    """Bit vector for a schedule; start bits follow the on/off transitions."""
    disc = inst.discretization
    x = np.zeros(layout.dim, dtype=np.int8)
    on = np.asarray(schedule.on, dtype=bool)
    if on.shape != (layout.T, layout.N):
        raise ValueError("schedule shape differs from layout")
    top = 2**layout.B - 1
    for t in range(layout.T):
        for k, unit in enumerate(inst.units):
            if not on[t, k]:
                continue
            x[layout.on(k, t)] = 1
            gen = float(schedule.gen[t, k])
            step = disc.step(k)
            tol = 1e-9 * max(1.0, abs(unit.maxgen))
            if gen < unit.mingen - tol or gen > unit.maxgen + tol:
                raise ValueError(f"t={t} unit {k}: gen {gen} outside [{unit.mingen}, {unit.maxgen}]")
            level = 0 if step == 0 else int(round((gen - unit.mingen) / step))
            level = min(max(level, 0), top)
            if step > 0 and abs(unit.mingen + level * step - gen) > 0.5 * step + tol:
                raise ValueError(f"t={t} unit {k}: gen {gen} not on the power grid")
            for b in range(layout.B):
                x[layout.power(k, b, t)] = (level >> b) & 1
    x[layout.start_indices()[starts_from_on(on)]] = 1
    if layout.relaxed:
        if schedule.demand_choice is None or schedule.renewable_choice is None:
            raise ValueError("relaxed layout requires scenario choices in the schedule")
        for t in range(layout.T):
            x[layout.demand(int(schedule.demand_choice[t]), t)] = 1
            for r in range(layout.R):
                x[layout.renewable(r, int(schedule.renewable_choice[t, r]), t)] = 1
    return x


def schedule_from_levels(inst: Instance, on, levels, demand_choice=None, renewable_choice=None) -> Schedule:
    """Build a schedule from on/off flags and integer power levels ``[t, k]``."""
    on = np.asarray(on, dtype=bool)
    levels = np.asarray(levels, dtype=np.int64)
    mingen = np.array([u.mingen for u in inst.units])
    steps = np.array([inst.discretization.step(k) for k in range(inst.N)])
    gen = np.where(on, mingen[None, :] + levels * steps[None, :], 0.0)
    choice_d = None if demand_choice is None else np.asarray(demand_choice, dtype=int)
    choice_r = None if renewable_choice is None else np.asarray(renewable_choice, dtype=int)
    return Schedule(on, starts_from_on(on), gen, choice_d, choice_r)
