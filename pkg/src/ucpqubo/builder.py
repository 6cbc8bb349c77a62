"""Deterministic UCP QUBO: penalty weights, matrix assembly and a direct evaluator.

The objective is the sum of six terms over the layout of :mod:`ucpqubo.layout`:

* cost: ``Pcost * (sum_t sum_k kappa_k(t))**2`` (or the plain sum with ``linear_cost``)
* demand: ``Pdemand * sum_t (sum_k gen_k(t) - d(t))**2``
* minup: ``Pminup * sum_t sum_k s_k(t) * (L * s_k(t) - sum_{tau=t}^{t+L-1} on_k(tau))``
  where ``L = min(minup_k, T - t)`` is the window length left in the horizon
* mindown: ``Pmindown * sum_t sum_k (on_k(t-1) - on_k(t) + s_k(t)) * sum_{tau=t}^{t+mindown_k-1} on_k(tau)``
* inter1: ``Pinter1 * sum_t sum_k sum_b x^p_{k,b}(t) * (1 - on_k(t))``
* inter2: ``Pinter2 * sum_{t=-1}^{T-2} sum_k (on_k(t+1) - s_k(t+1))**2 + on_k(t) * (s_k(t+1) - on_k(t+1))``

with the state before the horizon taken as off (``on_k(-1) = 0``) and window
sums truncated at the last timestep.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .layout import VariableLayout, layout_for
from .model import DeterministicInstance, Instance, effective_demand
from .qubo import QuboAccumulator, QuboMatrix

HARD_TERMS = ("minup", "mindown", "inter1", "inter2")
DETERMINISTIC_TERMS = ("cost", "demand") + HARD_TERMS


@dataclass(frozen=True)
class PenaltyWeights:
    Pcost: float = 1.0
    Pdemand: float = 0.0
    Pminup: float = 0.0
    Pmindown: float = 0.0
    Pinter1: float = 0.0
    Pinter2: float = 0.0
    Pvar: float = 0.0
    PsetD: float = 0.0
    PsetRE: float = 0.0

    def scaled(self, factor: float) -> "PenaltyWeights":
        return PenaltyWeights(**{k: v * factor for k, v in self.to_dict().items()})

    def replace(self, **changes) -> "PenaltyWeights":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def span(self) -> float:
        """Ratio of the largest to the smallest positive weight."""
        positive = [v for v in self.to_dict().values() if v > 0]
        return max(positive) / min(positive) if positive else 1.0


def cost_scale(inst: Instance) -> float:
    """Largest single-unit, single-timestep cost swing ``varcost*(maxgen-mingen)+startcost``."""
    return max(u.varcost * u.span + u.startcost for u in inst.units)


def tune_penalties(inst: Instance, Pcost: float = 1.0) -> PenaltyWeights:
    """Closed-form weights that rank hard constraints over demand over cost.

    ``Pdemand = 2 N^2 dk^2 / min_p^2 * Pcost`` where ``dk`` is :func:`cost_scale`
    and ``min_p`` the finest power weight; the hard-constraint weights are
    ``1e2``, ``1e4`` and ``1e6`` times ``N^2 dk^2``.
    """
    if not inst.units or inst.B < 1:
        raise ValueError("instance needs at least one unit and B >= 1")
    dk = cost_scale(inst)
    if dk <= 0:
        raise ValueError("degenerate costs: every unit has zero cost swing")
    positive = [float(w[0]) for w in inst.discretization.weights if w[0] > 0]
    if not positive:
        raise ValueError("degenerate discretization: every unit has mingen == maxgen")
    base = inst.N**2 * dk**2
    return PenaltyWeights(
        Pcost=Pcost,
        Pdemand=2.0 * base / min(positive) ** 2 * Pcost,
        Pminup=1e2 * base,
        Pmindown=1e2 * base,
        Pinter1=1e4 * base,
        Pinter2=1e6 * base,
    )


def _unit_arrays(inst: Instance):
    weights = np.stack(inst.discretization.weights)  # (N, B)
    varcost = np.array([u.varcost for u in inst.units], dtype=float)
    startcost = np.array([u.startcost for u in inst.units], dtype=float)
    mingen = np.array([u.mingen for u in inst.units], dtype=float)
    return weights, varcost, startcost, mingen


def add_schedule_terms(
    acc: QuboAccumulator,
    inst: Instance,
    layout: VariableLayout,
    weights: PenaltyWeights,
    terms: Iterable[str] = DETERMINISTIC_TERMS,
    linear_cost: bool = False,
) -> None:
    """Add every term of the deterministic objective except demand matching."""
    terms = set(terms)
    pw, varcost, startcost, mingen = _unit_arrays(inst)
    P = layout.power_indices()
    X = layout.on_indices()
    S = layout.start_indices()
    T = layout.T

    if "cost" in terms and weights.Pcost != 0:
        idx = np.concatenate([P.ravel(), X.ravel(), S.ravel()])
        coef = np.concatenate(
            [
                np.broadcast_to(varcost[None, :, None] * pw[None], P.shape).ravel(),
                np.broadcast_to(varcost * mingen, X.shape).ravel(),
                np.broadcast_to(startcost, S.shape).ravel(),
            ]
        )
        if linear_cost:
            acc.add_linear(weights.Pcost, idx, coef)
        else:
            acc.add_squared_affine(weights.Pcost, idx, coef)

    for k, unit in enumerate(inst.units):
        for t in range(T):
            if "minup" in terms and weights.Pminup != 0:
                L = min(int(unit.minup), T - t)
                acc.add_linear(weights.Pminup * L, [S[t, k]], [1.0])
                acc.add_product(-weights.Pminup, [S[t, k]], [1.0], X[t : t + L, k], 1.0)
            if "mindown" in terms and weights.Pmindown != 0:
                window = X[t : min(T, t + int(unit.mindown)), k]
                idx, coef = [X[t, k], S[t, k]], [-1.0, 1.0]
                if t > 0:
                    idx, coef = [X[t - 1, k]] + idx, [1.0] + coef
                acc.add_product(weights.Pmindown, idx, coef, window, 1.0)
            if "inter1" in terms and weights.Pinter1 != 0:
                acc.add_linear(weights.Pinter1, P[t, k], 1.0)
                acc.add_product(-weights.Pinter1, P[t, k], 1.0, [X[t, k]], [1.0])
            if "inter2" in terms and weights.Pinter2 != 0:
                # pair (t-1, t); t = 0 pairs with the off pre-horizon state
                acc.add_squared_affine(weights.Pinter2, [X[t, k], S[t, k]], [1.0, -1.0])
                if t > 0:
                    acc.add_product(weights.Pinter2, [X[t - 1, k]], [1.0], [S[t, k], X[t, k]], [1.0, -1.0])


def build_qubo(
    inst: DeterministicInstance,
    weights: Optional[PenaltyWeights] = None,
    terms: Iterable[str] = DETERMINISTIC_TERMS,
    linear_cost: bool = False,
) -> QuboMatrix:
    """Assemble the deterministic QUBO; ``offset`` carries ``Pdemand * sum_t d(t)**2``."""
    if weights is None:
        weights = tune_penalties(inst)
    layout = layout_for(inst)
    acc = QuboAccumulator(layout.dim)
    terms = tuple(terms)
    add_schedule_terms(acc, inst, layout, weights, terms, linear_cost)
    if "demand" in terms and weights.Pdemand != 0:
        pw, _, _, mingen = _unit_arrays(inst)
        P, X = layout.power_indices(), layout.on_indices()
        d = effective_demand(inst)
        for t in range(layout.T):
            idx = np.concatenate([P[t].ravel(), X[t]])
            coef = np.concatenate([pw.ravel(), mingen])
            acc.add_squared_affine(weights.Pdemand, idx, coef, -d[t])
    return acc.build()


# -- direct (matrix-free) evaluation -------------------------------------------------


def _split(x, layout: VariableLayout):
    x = np.asarray(x).astype(np.int64)
    if x.shape != (layout.dim,):
        raise ValueError(f"assignment length {x.size} differs from layout dim {layout.dim}")
    xp = x[layout.power_indices()]
    on = x[layout.on_indices()]
    s = x[layout.start_indices()]
    return x, xp, on, s


def schedule_terms_direct(
    inst: Instance, weights: PenaltyWeights, x, layout: VariableLayout, linear_cost: bool = False
) -> dict:
    """Cost and hard-constraint terms evaluated by looping over their definitions."""
    _, xp, on, s = _split(x, layout)
    pw, varcost, startcost, mingen = _unit_arrays(inst)
    T, N, B = layout.T, layout.N, layout.B

    total_kappa = 0.0
    for t in range(T):
        for k in range(N):
            power = mingen[k] * on[t, k]
            for b in range(B):
                power += pw[k, b] * xp[t, k, b]
            total_kappa += varcost[k] * power + startcost[k] * s[t, k]
    cost = weights.Pcost * (total_kappa if linear_cost else total_kappa**2)

    minup = mindown = inter1 = inter2 = 0.0
    for k, unit in enumerate(inst.units):
        for t in range(T):
            window_up = 0
            for tau in range(t, min(T, t + int(unit.minup))):
                window_up += on[tau, k]
            L = min(int(unit.minup), T - t)
            minup += s[t, k] * (L * s[t, k] - window_up)

            prev = on[t - 1, k] if t > 0 else 0
            window_down = 0
            for tau in range(t, min(T, t + int(unit.mindown))):
                window_down += on[tau, k]
            mindown += (prev - on[t, k] + s[t, k]) * window_down

            for b in range(B):
                inter1 += xp[t, k, b] * (1 - on[t, k])

            inter2 += (on[t, k] - s[t, k]) ** 2 + prev * (s[t, k] - on[t, k])

    return {
        "cost": cost,
        "minup": weights.Pminup * minup,
        "mindown": weights.Pmindown * mindown,
        "inter1": weights.Pinter1 * inter1,
        "inter2": weights.Pinter2 * inter2,
    }


def supplied_power(inst: Instance, x, layout: VariableLayout) -> np.ndarray:
    """Total conventional output per timestep as read literally from the bits."""
    _, xp, on, _ = _split(x, layout)
    pw, _, _, mingen = _unit_arrays(inst)
    out = np.zeros(layout.T)
    for t in range(layout.T):
        for k in range(layout.N):
            out[t] += mingen[k] * on[t, k] + float(np.dot(pw[k], xp[t, k]))
    return out


def penalty_breakdown(
    inst: DeterministicInstance, weights: PenaltyWeights, x, linear_cost: bool = False
) -> dict:
    """Per-term values of the deterministic objective; ``total`` is their sum."""
    layout = layout_for(inst)
    terms = schedule_terms_direct(inst, weights, x, layout, linear_cost)
    gen = supplied_power(inst, x, layout)
    d = effective_demand(inst)
    terms["demand"] = weights.Pdemand * sum((gen[t] - d[t]) ** 2 for t in range(layout.T))
    terms = {name: terms[name] for name in DETERMINISTIC_TERMS}
    terms["total"] = sum(terms.values())
    return terms
