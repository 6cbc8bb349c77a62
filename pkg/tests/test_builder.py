from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ucpqubo.builder import (
    DETERMINISTIC_TERMS,
    HARD_TERMS,
    PenaltyWeights,
    build_qubo,
    cost_scale,
    penalty_breakdown,
    tune_penalties,
)
from ucpqubo.evaluate import exact_commitment_oracle
from ucpqubo.layout import layout_for, schedule_from_levels, encode
from ucpqubo.model import DeterministicInstance, UnitSpec, effective_demand

# independent exact arithmetic over the two reference units
_DK = Fraction(max(65 * 471 + 200, 25 * 650 + 500))
_MIN_P = Fraction(471, 1023)
PDEMAND_XS = float(2 * 4 * _DK**2 / _MIN_P**2)
BASE_XS = float(4 * _DK**2)


def test_cost_scale(xs):
    assert cost_scale(xs) == 30815


def test_tuned_weights(xs_weights):
    assert xs_weights.Pcost == 1.0
    assert xs_weights.Pdemand == pytest.approx(PDEMAND_XS, rel=1e-12)
    assert xs_weights.Pdemand == pytest.approx(3.5836e10, rel=1e-4)
    assert xs_weights.Pminup == pytest.approx(1e2 * BASE_XS)
    assert xs_weights.Pmindown == pytest.approx(1e2 * BASE_XS)
    assert xs_weights.Pinter1 == pytest.approx(1e4 * BASE_XS)
    assert xs_weights.Pinter2 == pytest.approx(1e6 * BASE_XS)


def test_degenerate_costs_rejected():
    inst = DeterministicInstance([UnitSpec(0, 0, 0, 10)], [5.0])
    with pytest.raises(ValueError, match="degenerate costs"):
        tune_penalties(inst)


def test_degenerate_discretization_rejected():
    inst = DeterministicInstance([UnitSpec(1, 1, 5, 5)], [5.0])
    with pytest.raises(ValueError, match="degenerate discretization"):
        tune_penalties(inst)


def test_weights_helpers():
    w = PenaltyWeights(Pcost=1.0, Pdemand=10.0)
    assert w.scaled(2.0).Pdemand == 20.0
    assert w.replace(Pvar=3.0).Pvar == 3.0
    assert w.span() == 10.0


def test_reference_matrix_shape(xs_qubo):
    assert xs_qubo.dim == 72
    assert xs_qubo.nnz == 2628


def test_offset_is_weighted_squared_demand(xs, xs_qubo, xs_weights):
    d = effective_demand(xs)
    assert xs_qubo.offset == pytest.approx(xs_weights.Pdemand * float(np.sum(d**2)), rel=1e-12)
    assert xs_qubo.energy(np.zeros(72)) == xs_qubo.offset


def test_matrix_equals_direct_evaluation(xs, xs_qubo, xs_weights, rng):
    X = rng.integers(0, 2, (300, xs_qubo.dim))
    energies = xs_qubo.energies(X)
    for x, e in zip(X, energies):
        total = penalty_breakdown(xs, xs_weights, x)["total"]
        assert e == pytest.approx(total, rel=1e-9)


def test_linear_cost_variant(xs, xs_weights, rng):
    q = build_qubo(xs, xs_weights, linear_cost=True)
    for x in rng.integers(0, 2, (50, q.dim)):
        assert q.energy(x) == pytest.approx(penalty_breakdown(xs, xs_weights, x, linear_cost=True)["total"], rel=1e-9)


def test_single_term_matrices_add_up(xs, xs_qubo, xs_weights, rng):
    parts = [build_qubo(xs, xs_weights, terms=[t]) for t in DETERMINISTIC_TERMS]
    for x in rng.integers(0, 2, (20, 72)):
        assert sum(p.energy(x) for p in parts) == pytest.approx(xs_qubo.energy(x), rel=1e-9)


def _xs_vector(xs, on, levels):
    return encode(schedule_from_levels(xs, np.array(on, bool), np.array(levels)), layout_for(xs), xs)


def test_optimum_has_zero_hard_terms(xs, xs_weights):
    opt = exact_commitment_oracle(xs)
    terms = penalty_breakdown(xs, xs_weights, opt.assignment)
    assert all(terms[t] == 0 for t in HARD_TERMS)
    mismatch = terms["demand"] / xs_weights.Pdemand
    assert mismatch < (0.5 * 471 / 1023) ** 2 * 3


def test_energy_of_feasible_schedule_is_cost_squared_plus_mismatch(xs, xs_qubo, xs_weights):
    x = _xs_vector(xs, [[0, 1], [1, 1], [1, 1]], [[0, 300], [200, 900], [100, 400]])
    terms = penalty_breakdown(xs, xs_weights, x)
    assert all(terms[t] == 0 for t in HARD_TERMS)
    layout = layout_for(xs)
    gen = x[layout.power_indices()]  # bits only; cost recomputed from the decoded schedule
    from ucpqubo.evaluate import schedule_cost
    from ucpqubo.layout import decode

    s = decode(x, layout, xs)
    cost = schedule_cost(s, xs)
    assert terms["cost"] == pytest.approx(cost**2, rel=1e-12)
    assert xs_qubo.energy(x) == pytest.approx(cost**2 + terms["demand"], rel=1e-9)
    assert gen.shape == (3, 2, 10)


def test_minup_violation_term(xs, xs_weights):
    # unit 0 has minup 2: on at t=0 only
    x = _xs_vector(xs, [[1, 0], [0, 0], [0, 0]], np.zeros((3, 2), int))
    terms = penalty_breakdown(xs, xs_weights, x)
    assert terms["minup"] == pytest.approx(xs_weights.Pminup * (2 - 1))
    assert terms["mindown"] == 0 and terms["inter2"] == 0


def test_minup_window_clipped_at_horizon_end(xs, xs_weights):
    # start in the last step: the remaining window has length 1 and is satisfied
    x = _xs_vector(xs, [[0, 0], [0, 0], [1, 1]], np.zeros((3, 2), int))
    assert penalty_breakdown(xs, xs_weights, x)["minup"] == 0


def test_mindown_violation_term(xs, xs_weights):
    # unit 1 has mindown 2: off at t=1, on again at t=2
    x = _xs_vector(xs, [[0, 1], [0, 0], [0, 1]], np.zeros((3, 2), int))
    terms = penalty_breakdown(xs, xs_weights, x)
    assert terms["mindown"] == pytest.approx(xs_weights.Pmindown * 1)


def test_interlock_term_counts_bits(xs, xs_weights):
    layout = layout_for(xs)
    x = np.zeros(layout.dim, dtype=int)
    x[layout.power(0, 0, 1)] = 1
    x[layout.power(1, 5, 2)] = 1
    x[layout.power(1, 6, 2)] = 1
    assert penalty_breakdown(xs, xs_weights, x)["inter1"] == pytest.approx(3 * xs_weights.Pinter1)


@pytest.mark.parametrize(
    "prev, on, start, expected",
    [(0, 1, 1, 0), (0, 1, 0, 1), (0, 0, 1, 1), (0, 0, 0, 0), (1, 1, 0, 0), (1, 1, 1, 0), (1, 0, 0, 0), (1, 0, 1, 2)],
)
def test_start_link_term(xs, xs_weights, prev, on, start, expected):
    layout = layout_for(xs)
    x = np.zeros(layout.dim, dtype=int)
    x[layout.on(1, 0)] = prev
    x[layout.start(1, 0)] = prev
    x[layout.on(1, 1)] = on
    x[layout.start(1, 1)] = start
    assert penalty_breakdown(xs, xs_weights, x)["inter2"] == pytest.approx(expected * xs_weights.Pinter2)


def test_redundant_start_while_running_hits_mindown(xs, xs_weights):
    layout = layout_for(xs)
    x = np.zeros(layout.dim, dtype=int)
    for t in (0, 1):
        x[layout.on(1, t)] = 1
        x[layout.start(1, t)] = 1
    terms = penalty_breakdown(xs, xs_weights, x)
    assert terms["inter2"] == 0
    assert terms["mindown"] > 0


def test_tiny_instance_builds_without_out_of_range_entries():
    inst = DeterministicInstance([UnitSpec(3, 2, 1, 4)], [2.0], (), 2)
    q = build_qubo(inst)
    assert q.dim == 4
    assert q.rows.max() < 4 and q.cols.max() < 4
