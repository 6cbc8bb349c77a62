"""Bundled reference instances (two units, two renewables)."""

from __future__ import annotations

import json
from importlib import resources

from .model import DeterministicInstance, StochasticInstance, instance_from_dict


def _load(name: str):
    text = resources.files("ucpqubo").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return instance_from_dict(json.loads(text))


def xs() -> DeterministicInstance:
    """Three-timestep instance, effective demand (468, 945, 560)."""
    return _load("xs.json")


def xs_relaxed() -> StochasticInstance:
    """XS with three-point distributions on demand and both renewables."""
    return _load("xs_relaxed.json")


def xxs() -> DeterministicInstance:
    """First timestep of XS only."""
    base = xs()
    return DeterministicInstance(
        base.units, base.demand[:1], [r[:1] for r in base.renewables], base.B, 1
    )


def xxs_relaxed() -> StochasticInstance:
    base = xs_relaxed()
    return StochasticInstance(
        base.units, base.demand_dist[:1], [r[:1] for r in base.renewable_dist], base.B, 1
    )


BUNDLED = {
    "xxs": xxs,
    "xs": xs,
    "xxs-relaxed": xxs_relaxed,
    "xs-relaxed": xs_relaxed,
}
