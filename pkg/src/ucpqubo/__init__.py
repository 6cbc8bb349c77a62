"""Unit commitment problems compiled to QUBO matrices, with annealing and exact solvers."""

from __future__ import annotations

from .builder import PenaltyWeights, build_qubo, penalty_breakdown, tune_penalties
from .evaluate import (
    check_assignment,
    check_feasibility,
    estimate_violation_rate,
    exact_commitment_oracle,
    schedule_cost,
    score,
)
from .layout import Schedule, VariableLayout, build_layout, decode, encode, layout_for
from .model import (
    DeterministicInstance,
    DiscreteDistribution,
    StochasticInstance,
    UnitSpec,
    discretize,
    fineness,
    load_instance,
    realizations,
    save_instance,
    validate,
)
from .qubo import QuboMatrix
from .solve import AnnealParams, brute_force, local_descent, simulated_anneal
from .stochastic import build_qubo_relaxed, relaxed_penalty_breakdown, tune_all_relaxed

__version__ = "0.1.0"

__all__ = [
    "AnnealParams",
    "DeterministicInstance",
    "DiscreteDistribution",
    "PenaltyWeights",
    "QuboMatrix",
    "Schedule",
    "StochasticInstance",
    "UnitSpec",
    "VariableLayout",
    "brute_force",
    "build_layout",
    "build_qubo",
    "build_qubo_relaxed",
    "check_assignment",
    "check_feasibility",
    "decode",
    "discretize",
    "encode",
    "estimate_violation_rate",
    "exact_commitment_oracle",
    "fineness",
    "layout_for",
    "load_instance",
    "local_descent",
    "penalty_breakdown",
    "realizations",
    "relaxed_penalty_breakdown",
    "save_instance",
    "schedule_cost",
    "score",
    "simulated_anneal",
    "tune_all_relaxed",
    "tune_penalties",
    "validate",
]
