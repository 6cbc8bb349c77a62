from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ucpqubo import instances
from ucpqubo.model import (
    DeterministicInstance,
    DiscreteDistribution,
    StochasticInstance,
    UnitSpec,
    discretize,
    effective_demand,
    fineness,
    instance_from_dict,
    instance_hash,
    is_valid,
    load_instance,
    realizations,
    save_instance,
    validate,
)


def test_single_bit_weight_is_span():
    assert discretize(3.0, 10.0, 1).tolist() == [7.0]


def test_two_bit_weights():
    assert np.allclose(discretize(0.0, 1.0, 2), [1 / 3, 2 / 3])


def test_unit_one_finest_weight():
    assert discretize(34, 505, 10)[0] == pytest.approx(471 / 1023)
    assert discretize(34, 505, 10)[0] == pytest.approx(0.460411, abs=1e-6)


@pytest.mark.parametrize("B", [0, 31])
def test_resolution_out_of_range(B):
    with pytest.raises(ValueError):
        discretize(0, 1, B)


def test_inverted_range_rejected():
    with pytest.raises(ValueError):
        discretize(5, 4, 3)


@given(st.floats(0, 1000), st.floats(0, 1000), st.integers(1, 20))
def test_weights_sum_to_span(a, b, B):
    lo, hi = min(a, b), max(a, b)
    w = discretize(lo, hi, B)
    assert math.isclose(w.sum(), hi - lo, rel_tol=1e-12, abs_tol=1e-9)
    assert np.all(np.diff(w) >= 0)


@pytest.mark.parametrize(
    "B, value, count",
    [(2, 0.3333, 4), (3, 0.1429, 8), (4, 0.0667, 16), (6, 0.0159, 64), (10, 0.001, 1024)],
)
def test_fineness_table(B, value, count):
    digits = 3 if B == 10 else 4
    assert round(fineness(B), digits) == pytest.approx(value)
    assert realizations(B) == count


def test_fineness_twenty_bits():
    assert fineness(20) == pytest.approx(1 / (2**20 - 1))
    assert 9e-7 < fineness(20) < 1.1e-6


def test_effective_demand_reference(xs):
    assert effective_demand(xs).tolist() == [468.0, 945.0, 560.0]


def test_effective_demand_without_renewables():
    inst = DeterministicInstance([UnitSpec(1, 1, 0, 10)], [3.0, 4.0])
    assert effective_demand(inst).tolist() == [3.0, 4.0]


def test_effective_demand_zero_when_renewables_cover():
    inst = DeterministicInstance([UnitSpec(1, 1, 0, 10)], [5.0, 6.0], [[2.0, 6.0], [3.0, 0.0]])
    assert effective_demand(inst).tolist() == [0.0, 0.0]


def test_reference_instances_are_clean(xs, xs_relaxed):
    assert validate(xs) == []
    assert validate(xs_relaxed) == []


def test_unnormalized_distribution_flagged(xs_relaxed):
    data = xs_relaxed.to_dict()
    data["demand_dist"][0]["probs"] = [0.1, 0.7, 0.1]
    findings = validate(instance_from_dict(data))
    assert any("distribution not normalized" in f.message for f in findings)


def test_renormalize_on_load(xs_relaxed):
    data = xs_relaxed.to_dict()
    data["demand_dist"][0]["probs"] = [0.1, 0.7, 0.1]
    inst = instance_from_dict(data, renormalize=True)
    assert is_valid(inst)
    assert math.fsum(inst.demand_dist[0].probs) == pytest.approx(1.0)


def test_minup_zero_flagged(xs):
    data = xs.to_dict()
    data["units"][0]["minup"] = 0
    findings = validate(instance_from_dict(data))
    assert any("minup below 1" in f.message for f in findings)


@pytest.mark.parametrize(
    "field, value, message",
    [("mingen", 950, "mingen exceeds maxgen"), ("varcost", -1, "negative cost"), ("mindown", 1.5, "not an integer")],
)
def test_unit_errors(xs, field, value, message):
    data = xs.to_dict()
    data["units"][1][field] = value
    assert any(message in f.message for f in validate(instance_from_dict(data)))


def test_negative_effective_demand_is_warning_only():
    inst = DeterministicInstance([UnitSpec(1, 1, 0, 10)], [1.0], [[5.0]])
    findings = validate(inst)
    assert [f.level for f in findings] == ["warning"]
    assert is_valid(inst)


def test_ragged_stage_counts_flagged(xs_relaxed):
    data = xs_relaxed.to_dict()
    data["renewable_dist"][0][1] = {"values": [1, 2], "probs": [0.5, 0.5]}
    assert any("ragged" in f.message for f in validate(instance_from_dict(data)))


def test_distribution_mean():
    dist = DiscreteDistribution((518, 618, 718), (0.1, 0.8, 0.1))
    assert dist.mean() == pytest.approx(618)
    assert DiscreteDistribution.point(7.0).mean() == 7.0


def test_expected_instance(xs_relaxed):
    e = xs_relaxed.expected_instance()
    assert effective_demand(e) == pytest.approx([468.0, 1035.0, 560.0])


def test_json_round_trip(tmp_path, xs, xs_relaxed):
    for inst in (xs, xs_relaxed):
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        back = load_instance(path)
        assert back == inst
        assert instance_hash(back) == instance_hash(inst)


def test_hash_changes_with_content(xs):
    assert instance_hash(xs) != instance_hash(xs.with_resolution(9))


def test_missing_demand_rejected():
    with pytest.raises(KeyError):
        instance_from_dict({"units": []})


def test_bundled_xxs_is_first_timestep(xs, xxs):
    assert xxs.T == 1 and xxs.units == xs.units
    assert effective_demand(xxs).tolist() == [468.0]


def test_instances_are_immutable(xs):
    with pytest.raises(AttributeError):
        xs.B = 3  # type: ignore[misc]
    assert isinstance(instances.xs_relaxed(), StochasticInstance)
    json.dumps(xs.to_dict())
