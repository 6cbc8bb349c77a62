from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ucpqubo.qubo import QuboMatrix
from ucpqubo.solve import (
    AnnealParams,
    all_deltas,
    all_energies,
    brute_force,
    default_betas,
    delta_energy,
    derive_seed,
    gray_code_iter,
    local_descent,
    simulated_anneal,
)


def random_qubo(seed, n):
    rng = np.random.default_rng(seed)
    return QuboMatrix.from_dense(np.triu(rng.normal(size=(n, n))), float(rng.normal()))


def test_delta_matches_full_evaluation():
    q = random_qubo(1, 30)
    rng = np.random.default_rng(2)
    x = rng.integers(0, 2, 30)
    base = q.energy(x)
    deltas = all_deltas(q, x)
    for i in range(30):
        y = x.copy()
        y[i] ^= 1
        assert delta_energy(q, x, i) == pytest.approx(q.energy(y) - base, abs=1e-10)
        assert deltas[i] == pytest.approx(q.energy(y) - base, abs=1e-10)


def test_flip_and_flip_back():
    q = random_qubo(3, 10)
    x = np.zeros(10, dtype=int)
    d1 = delta_energy(q, x, 4)
    x[4] = 1
    assert d1 + delta_energy(q, x, 4) == pytest.approx(0.0, abs=1e-12)


def test_zero_matrix_deltas():
    q = QuboMatrix.from_coo(5, [], [], [])
    assert np.all(all_deltas(q, np.ones(5)) == 0)
    with pytest.raises(IndexError):
        delta_energy(q, np.ones(5), 5)


def test_params_validation():
    with pytest.raises(ValueError):
        AnnealParams(reads=0)
    with pytest.raises(ValueError):
        AnnealParams(beta_start=2.0, beta_end=1.0)


def test_single_variable():
    q = QuboMatrix.from_dense([[-1.0]], offset=0.5)
    r = simulated_anneal(q, AnnealParams(reads=5, sweeps=10))
    assert r.best.tolist() == [1] and r.energy == pytest.approx(-0.5)


def test_seeded_runs_are_identical():
    q = random_qubo(4, 20)
    a = simulated_anneal(q, AnnealParams(reads=20, sweeps=50, seed=9))
    b = simulated_anneal(q, AnnealParams(reads=20, sweeps=50, seed=9))
    assert np.array_equal(a.samples, b.samples) and np.array_equal(a.energies, b.energies)


def test_threads_do_not_change_results():
    q = random_qubo(5, 20)
    a = simulated_anneal(q, AnnealParams(reads=16, sweeps=40, seed=3, threads=1))
    b = simulated_anneal(q, AnnealParams(reads=16, sweeps=40, seed=3, threads=4))
    assert np.array_equal(a.samples, b.samples)


def test_sa_never_beats_brute_force():
    for seed in range(5):
        q = random_qubo(seed, 12)
        exact = brute_force(q)
        r = simulated_anneal(q, AnnealParams(reads=30, sweeps=100, seed=seed))
        assert r.energy >= exact.energy - 1e-9


def test_sa_solves_small_random_instances():
    q = random_qubo(11, 14)
    r = simulated_anneal(q, AnnealParams(reads=100, sweeps=200, seed=0))
    assert r.energy == pytest.approx(brute_force(q).energy)


def test_default_betas_ordering(xs_qubo):
    lo, hi = default_betas(xs_qubo)
    assert 0 < lo < hi
    assert hi == pytest.approx(50.0 / xs_qubo.coefficient_range()[0])


def test_descent_reaches_local_minimum(xxs_qubo):
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.integers(0, 2, xxs_qubo.dim)
        y = local_descent(xxs_qubo, x)
        assert xxs_qubo.energy(y) <= xxs_qubo.energy(x)
        assert np.all(all_deltas(xxs_qubo, y) >= 0)


def test_descent_keeps_optimum(xxs_qubo):
    best = brute_force(xxs_qubo).best
    assert np.array_equal(local_descent(xxs_qubo, best), best)


def test_descent_shape_check(xxs_qubo):
    with pytest.raises(ValueError):
        local_descent(xxs_qubo, np.zeros(3))


def test_brute_force_trivial_cases():
    q = QuboMatrix.from_coo(4, [], [], [], 2.0)
    r = brute_force(q)
    assert r.best.tolist() == [0, 0, 0, 0] and r.energy == 2.0 and r.visited == 16
    r = brute_force(QuboMatrix.from_dense(np.diag([-1.0, 1.0])))
    assert r.best.tolist() == [1, 0]


def test_brute_force_limit():
    with pytest.raises(ValueError):
        brute_force(QuboMatrix.from_coo(27, [], [], []))


@given(st.integers(0, 10_000), st.integers(1, 10))
def test_brute_force_matches_itertools(seed, n):
    q = random_qubo(seed, n)
    states = np.array(list(itertools.product((0, 1), repeat=n)))
    energies = q.energies(states)
    r = brute_force(q)
    assert r.energy == pytest.approx(energies.min(), abs=1e-9)


def test_brute_force_ties_go_to_lexicographically_smallest():
    q = QuboMatrix.from_dense(np.diag([-1.0, -1.0, 0.0]) + np.triu(np.full((3, 3), 0.0)) + np.array([[0, 1.0, 0], [0, 0, 0], [0, 0, 0]]))
    # optima: (1,0,*) and (0,1,*) with energy -1, third bit free
    r = brute_force(q)
    assert r.best.tolist() == [0, 1, 0]


def test_gray_code_visits_every_state_once():
    for n in range(1, 9):
        codes = [c for c, _ in gray_code_iter(n)]
        assert sorted(codes) == list(range(2**n))
        for (a, _), (b, bit) in zip(gray_code_iter(n), itertools.islice(gray_code_iter(n), 1, None)):
            assert bin(a ^ b).count("1") == 1 and a ^ b == 1 << bit


def test_all_energies_table():
    q = random_qubo(7, 9)
    table = all_energies(q)
    codes = np.arange(2**9)
    X = (codes[:, None] >> np.arange(9)) & 1
    assert np.allclose(table, q.energies(X))


def test_derived_seeds_are_distinct_and_stable():
    seeds = [derive_seed(1, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert derive_seed(1, 3) == seeds[3]
