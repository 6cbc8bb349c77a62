"""Relaxed multi-scenario QUBO.

Demand and renewable stages become decision variables through one-hot blocks.
The chosen effective demand of timestep ``t`` is

    d(t) = <e_D(t) | D(t)> - sum_r <e_RE_r(t) | s_r(t)>

and replaces the fixed ``d(t)`` in the demand-matching term. Two more terms are
added: ``Pvar * (sum_t [d(t) - <d>(t)])**2`` which keeps the accumulated demand
near its expectation, and one-hot penalties ``PsetD * sum_t (|e_D(t)| - 1)**2``
and ``PsetRE * sum_t sum_r (|e_RE_r(t)| - 1)**2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .builder import (
    DETERMINISTIC_TERMS,
    PenaltyWeights,
    _unit_arrays,
    add_schedule_terms,
    schedule_terms_direct,
    supplied_power,
    tune_penalties,
)
from .layout import VariableLayout, decode, layout_for
from .model import StochasticInstance
from .qubo import QuboAccumulator, QuboMatrix

RELAXED_TERMS = DETERMINISTIC_TERMS + ("var", "setD", "setRE")
WEIGHT_SPAN_WARNING = 1e15


def expected_effective_demand(stoch: StochasticInstance, t: Optional[int] = None):
    """Expected effective demand, by linearity ``E[D(t)] - sum_r E[S_r(t)]``.

    Returns a scalar for a given ``t`` or the whole length-``T`` series.
    """
    if t is None:
        return np.array([expected_effective_demand(stoch, tt) for tt in range(stoch.T)])
    return stoch.demand_dist[t].mean() - math.fsum(series[t].mean() for series in stoch.renewable_dist)


def tune_relaxed_penalties(base: PenaltyWeights) -> PenaltyWeights:
    """``PsetD = PsetRE = 1e8 * Pdemand`` and ``Pvar = 1e-2 * Pdemand``."""
    if base.Pdemand == 0:
        warnings.warn("Pdemand is zero; relaxed weights are degenerate", RuntimeWarning, stacklevel=2)
    return base.replace(PsetD=1e8 * base.Pdemand, PsetRE=1e8 * base.Pdemand, Pvar=1e-2 * base.Pdemand)


def tune_all_relaxed(stoch: StochasticInstance) -> PenaltyWeights:
    return tune_relaxed_penalties(tune_penalties(stoch))


def _scenario_linear_form(stoch: StochasticInstance, layout: VariableLayout, t: int):
    """Indices and coefficients of the chosen ``d(t)`` as a linear form in auxiliaries."""
    idx = [layout.demand_indices()[t]]
    coef = [np.array(stoch.demand_dist[t].values)]
    re = layout.renewable_indices()
    for r, series in enumerate(stoch.renewable_dist):
        idx.append(re[t, r])
        coef.append(-np.array(series[t].values))
    return np.concatenate(idx), np.concatenate(coef)


def build_qubo_relaxed(
    stoch: StochasticInstance,
    weights: Optional[PenaltyWeights] = None,
    linear_cost: bool = False,
    rescale: bool = False,
) -> QuboMatrix:
    """Assemble the relaxed QUBO of dimension ``T * (N*(B+2) + R*n_R + n_D)``.

    With ``rescale`` every weight is divided by the largest one, which keeps the
    energy ordering and moves coefficients into a moderate range.
    """
    if weights is None:
        weights = tune_all_relaxed(stoch)
    if weights.span() > WEIGHT_SPAN_WARNING:
        warnings.warn(
            f"penalty weights span {weights.span():.2e}; cost-scale energy differences "
            "are near double-precision resolution",
            RuntimeWarning,
            stacklevel=2,
        )
    if rescale:
        weights = weights.scaled(1.0 / max(weights.to_dict().values()))
    layout = layout_for(stoch)
    acc = QuboAccumulator(layout.dim)
    add_schedule_terms(acc, stoch, layout, weights, DETERMINISTIC_TERMS, linear_cost)

    pw, _, _, mingen = _unit_arrays(stoch)
    P, X = layout.power_indices(), layout.on_indices()
    mean_d = expected_effective_demand(stoch)
    var_idx, var_coef = [], []
    for t in range(layout.T):
        aux_idx, aux_coef = _scenario_linear_form(stoch, layout, t)
        if weights.Pdemand != 0:
            idx = np.concatenate([P[t].ravel(), X[t], aux_idx])
            coef = np.concatenate([pw.ravel(), mingen, -aux_coef])
            acc.add_squared_affine(weights.Pdemand, idx, coef)
        var_idx.append(aux_idx)
        var_coef.append(aux_coef)
        if weights.PsetD != 0:
            acc.add_squared_affine(weights.PsetD, layout.demand_indices()[t], 1.0, -1.0)
        if weights.PsetRE != 0:
            for r in range(layout.R):
                acc.add_squared_affine(weights.PsetRE, layout.renewable_indices()[t, r], 1.0, -1.0)
    if weights.Pvar != 0:
        acc.add_squared_affine(
            weights.Pvar, np.concatenate(var_idx), np.concatenate(var_coef), -math.fsum(mean_d)
        )
    return acc.build()


def chosen_demand(stoch: StochasticInstance, x, layout: VariableLayout) -> np.ndarray:
    """``d(t)`` read literally from the one-hot blocks (sums over all set bits)."""
    x = np.asarray(x).astype(np.int64)
    out = np.zeros(layout.T)
    for t in range(layout.T):
        for j in range(layout.n_D):
            out[t] += x[layout.demand(j, t)] * stoch.demand_dist[t].values[j]
        for r in range(layout.R):
            for i in range(layout.n_R):
                out[t] -= x[layout.renewable(r, i, t)] * stoch.renewable_dist[r][t].values[i]
    return out


def relaxed_penalty_breakdown(
    stoch: StochasticInstance, weights: PenaltyWeights, x, linear_cost: bool = False
) -> dict:
    """Direct evaluation of every relaxed term; ``total`` is their sum."""
    layout = layout_for(stoch)
    terms = schedule_terms_direct(stoch, weights, x, layout, linear_cost)
    x = np.asarray(x).astype(np.int64)
    gen = supplied_power(stoch, x, layout)
    d = chosen_demand(stoch, x, layout)
    mean_d = expected_effective_demand(stoch)
    terms["demand"] = weights.Pdemand * sum((gen[t] - d[t]) ** 2 for t in range(layout.T))
    terms["var"] = weights.Pvar * sum(d[t] - mean_d[t] for t in range(layout.T)) ** 2
    set_d = set_re = 0.0
    for t in range(layout.T):
        set_d += (sum(x[layout.demand(j, t)] for j in range(layout.n_D)) - 1) ** 2
        for r in range(layout.R):
            set_re += (sum(x[layout.renewable(r, i, t)] for i in range(layout.n_R)) - 1) ** 2
    terms["setD"] = weights.PsetD * set_d
    terms["setRE"] = weights.PsetRE * set_re
    terms = {name: terms[name] for name in RELAXED_TERMS}
    terms["total"] = sum(terms.values())
    return terms


@dataclass(frozen=True, eq=False)
class ScenarioChoice:
    demand_index: np.ndarray  # (T,)
    demand_value: np.ndarray  # (T,)
    renewable_index: np.ndarray  # (T, R)
    renewable_value: np.ndarray  # (T, R)
    effective_demand: np.ndarray  # (T,)
    probability: float
    malformed: bool = False

    def to_dict(self) -> dict:
        return {
            "demand_index": self.demand_index.tolist(),
            "demand_value": self.demand_value.tolist(),
            "renewable_index": self.renewable_index.tolist(),
            "renewable_value": self.renewable_value.tolist(),
            "effective_demand": self.effective_demand.tolist(),
            "probability": self.probability,
            "malformed": self.malformed,
        }


def scenario_from_indices(stoch: StochasticInstance, demand_index, renewable_index, malformed=False) -> ScenarioChoice:
    """Values, effective demand and probability of a joint stage selection.

    An index of ``-1`` (empty block) contributes value 0 and probability 0.
    """
    demand_index = np.asarray(demand_index, dtype=int)
    renewable_index = np.asarray(renewable_index, dtype=int).reshape(stoch.T, stoch.R)
    T, R = stoch.T, stoch.R
    d_val = np.zeros(T)
    r_val = np.zeros((T, R))
    prob = 1.0
    for t in range(T):
        j = demand_index[t]
        if j >= 0:
            d_val[t] = stoch.demand_dist[t].values[j]
            prob *= stoch.demand_dist[t].probs[j]
        else:
            prob = 0.0
        for r in range(R):
            i = renewable_index[t, r]
            if i >= 0:
                r_val[t, r] = stoch.renewable_dist[r][t].values[i]
                prob *= stoch.renewable_dist[r][t].probs[i]
            else:
                prob = 0.0
    return ScenarioChoice(
        demand_index, d_val, renewable_index, r_val, d_val - r_val.sum(axis=1), prob, malformed
    )


def chosen_scenario(assignment, layout: VariableLayout, stoch: StochasticInstance) -> ScenarioChoice:
    """Scenario selected by the one-hot blocks (lowest set bit wins if malformed)."""
    sched = decode(assignment, layout, stoch)
    return scenario_from_indices(stoch, sched.demand_choice, sched.renewable_choice, sched.malformed)
