import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

import oracles
from coverplan.errors import InvalidInputError
from coverplan.metrics import archive_hypervolumes, choose_reference_point, pareto_filter
from coverplan.moea import (
    EAConfig,
    MOEADConfig,
    crossover,
    evolve_moead,
    evolve_nsga2,
    initialize_population,
    mutate_once,
    non_dominated_sort,
    objective_normalization,
    survival,
)
from coverplan.moea.core import MemoEvaluator, dominates
from coverplan.moea.moead import neighborhoods, tchebycheff, weight_vectors
from coverplan.moea.nsga2 import crowding_distance

N_WP = 50


class FixedRandom:
    """Stands in for a Generator, returning preset values from random()."""

    def __init__(self, *values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def toy_fitness(genome):
    """Cheap two-objective stand-in: distinct ids help one objective, length hurts the other."""
    return (1.0 - len(set(genome)) / N_WP, float(len(genome)) + 0.01 * sum(genome))


fits_strategy = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=25)


# -- operators ---------------------------------------------------------------


def test_crossover_boundary_cuts():
    a, b = (1, 2, 3), (7, 8, 9, 10)
    assert crossover(a, b, FixedRandom(0.0)) == (b, a)
    assert crossover(a, b, FixedRandom(0.999)) == (a, b)


def test_crossover_identical_parents():
    rng = np.random.default_rng(0)
    a = (4, 5, 6, 7)
    for _ in range(50):
        assert crossover(a, a, rng) == (a, a)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 9), max_size=12), st.lists(st.integers(0, 9), max_size=12), st.integers(0, 10**6))
def test_crossover_conserves_genes(a, b, seed):
    c1, c2 = crossover(tuple(a), tuple(b), np.random.default_rng(seed))
    assert Counter(c1) + Counter(c2) == Counter(a) + Counter(b)


def test_delete_on_length_one():
    assert mutate_once((5,), N_WP, np.random.default_rng(0), "delete") == ()


def test_insert_on_empty():
    g = mutate_once((), N_WP, np.random.default_rng(0), "insert")
    assert len(g) == 1 and 0 <= g[0] < N_WP


def test_unknown_mutation():
    with pytest.raises(InvalidInputError):
        mutate_once((1,), N_WP, np.random.default_rng(0), "swap")


def test_mutation_choice_and_ids_are_uniform():
    rng = np.random.default_rng(1)
    ops = Counter()
    ids = Counter()
    base = tuple(range(10))
    for _ in range(6000):
        g = mutate_once(base, N_WP, rng)
        ops[len(g) - len(base)] += 1
        if len(g) == 11:
            ids.update(Counter(g) - Counter(base))
    assert stats.chisquare([ops[-1], ops[0], ops[1]]).pvalue > 0.001
    assert stats.chisquare([ids[i] for i in range(N_WP)]).pvalue > 0.001


def test_seeding_extremes():
    seeds = [tuple(range(30)), tuple(range(31))]  # longer than any random genome
    rng = np.random.default_rng(0)
    none = initialize_population(N_WP, seeds, EAConfig(p_seeded=0.0), rng)
    assert all(len(g) <= 20 for g in none)
    every = initialize_population(N_WP, seeds, EAConfig(p_seeded=1.0), rng)
    assert all(g in seeds for g in every)
    assert len(every) == 40


def test_seeding_rate_statistics():
    seeds = [tuple(range(30))]
    rng = np.random.default_rng(5)
    counts = [
        sum(g in seeds for g in initialize_population(N_WP, seeds, EAConfig(p_seeded=0.35), rng)) for _ in range(100)
    ]
    # mean of 100 binomial(40, 0.35) draws: 99% interval around 14
    half = 2.576 * math.sqrt(40 * 0.35 * 0.65 / 100)
    assert abs(np.mean(counts) - 14) <= half


def test_random_genome_lengths():
    rng = np.random.default_rng(2)
    pop = initialize_population(N_WP, [], EAConfig(pop_size=2000), rng)
    lengths = Counter(len(g) for g in pop)
    assert set(lengths) == set(range(2, 21))


def test_seeding_needs_pool():
    with pytest.raises(InvalidInputError):
        initialize_population(N_WP, [], EAConfig(p_seeded=0.5), np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(InvalidInputError):
        EAConfig(p_mutation=1.5)
    with pytest.raises(InvalidInputError):
        EAConfig(pop_size=1)
    with pytest.raises(InvalidInputError):
        MOEADConfig(neighborhood_size=50)
    with pytest.raises(InvalidInputError):
        MOEADConfig(delta=-0.1)


# -- sorting and survival ----------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(fits_strategy)
def test_first_front_matches_pairwise(fits):
    first = non_dominated_sort(fits)[0]
    expected = [i for i, p in enumerate(fits) if not any(dominates(q, p) for q in fits)]
    assert first == expected


@settings(max_examples=200, deadline=None)
@given(fits_strategy)
def test_fronts_partition_and_order(fits):
    fronts = non_dominated_sort(fits)
    assert sorted(i for f in fronts for i in f) == list(range(len(fits)))
    rank = {i: r for r, f in enumerate(fronts) for i in f}
    for i in range(len(fits)):
        for j in range(len(fits)):
            if dominates(fits[i], fits[j]):
                assert rank[i] < rank[j]


@settings(max_examples=200, deadline=None)
@given(fits_strategy, st.integers(1, 25))
def test_survivors_not_dominated_by_discarded(fits, size):
    size = min(size, len(fits))
    keep = survival(fits, size)
    assert len(keep) == size
    dropped = set(range(len(fits))) - set(keep)
    for k in keep:
        assert not any(dominates(fits[d], fits[k]) for d in dropped)


def test_crowding_extremes_infinite():
    fits = [(0, 4), (1, 3), (2, 1), (4, 0)]
    d = crowding_distance(fits, [0, 1, 2, 3])
    assert d[0] == d[3] == np.inf
    assert d[1] == pytest.approx((2 - 0) / 4 + (4 - 1) / 4)


# -- NSGA-II -----------------------------------------------------------------


def test_zero_generations_returns_initial():
    cfg = EAConfig(num_generations=0, rng_seed=3)
    res = evolve_nsga2(toy_fitness, N_WP, [], cfg)
    expected = initialize_population(N_WP, [], cfg, np.random.default_rng(3))
    assert [ind.genome for ind in res.population] == expected
    assert res.generations == 0


def test_same_seed_same_result():
    cfg = EAConfig(num_generations=30, p_mutation=0.5, p_crossover=0.5, rng_seed=11)
    a = evolve_nsga2(toy_fitness, N_WP, [], cfg)
    b = evolve_nsga2(toy_fitness, N_WP, [], cfg)
    assert a.population == b.population
    assert a.log == b.log


def test_evaluations_count_calls():
    calls = []

    def counted(g):
        calls.append(g)
        return toy_fitness(g)

    res = evolve_nsga2(counted, N_WP, [], EAConfig(num_generations=20, rng_seed=1))
    assert res.evaluations == len(calls) == len(res.log)
    assert len(set(calls)) == len(calls)  # never re-evaluated
    assert res.evaluations < 40 * 21  # unchanged offspring reused


def test_no_variation_keeps_seed_front():
    rng = np.random.default_rng(4)
    seeds = [tuple(int(x) for x in rng.integers(0, N_WP, rng.integers(1, 30))) for _ in range(12)]
    cfg = EAConfig(num_generations=10, p_mutation=0.0, p_crossover=0.0, p_seeded=1.0, rng_seed=2)
    res = evolve_nsga2(toy_fitness, N_WP, seeds, cfg)
    used = set(initialize_population(N_WP, seeds, cfg, np.random.default_rng(2)))
    seed_front = set(pareto_filter([toy_fitness(s) for s in used]))
    final = {tuple(ind.fitness) for ind in res.population}
    assert seed_front <= final


def test_budget_stops_at_generation_end():
    res = evolve_nsga2(toy_fitness, N_WP, [], EAConfig(num_generations=1000, eval_budget=300, rng_seed=0))
    assert res.evaluations >= 300
    before_last = sum(1 for r in res.log if r.generation < res.generations)
    assert before_last < 300


@pytest.mark.parametrize("algo", ["nsga2", "moead"])
def test_archive_hypervolume_monotone(algo):
    cfg = EAConfig(num_generations=40, p_mutation=0.3, p_crossover=0.3, rng_seed=5)
    if algo == "nsga2":
        res = evolve_nsga2(toy_fitness, N_WP, [], cfg)
    else:
        res = evolve_moead(toy_fitness, N_WP, [], MOEADConfig(eval_budget=800), cfg)
    ref = choose_reference_point([(r.coverage_score, r.energy) for r in res.log])
    hv = archive_hypervolumes(res.log, ref)
    assert all(b >= a - 1e-12 for a, b in zip(hv, hv[1:]))


def test_population_size_is_kept():
    res = evolve_nsga2(toy_fitness, N_WP, [], EAConfig(pop_size=12, num_generations=5))
    assert len(res.population) == 12


# -- MOEA/D ------------------------------------------------------------------


def test_weights_and_neighborhoods():
    w = weight_vectors(5)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-5)
    assert np.all(w > 0)
    hood = neighborhoods(w, 3)
    assert hood.shape == (5, 3)
    assert all(hood[i, 0] == i for i in range(5))
    full = neighborhoods(w, 5)
    assert all(sorted(row) == list(range(5)) for row in full)


def test_tchebycheff():
    ideal, nadir = np.array([0.0, 0.0]), np.array([1.0, 10.0])
    assert tchebycheff((0.5, 5.0), np.array([0.5, 0.5]), ideal, nadir) == pytest.approx(0.25)
    assert tchebycheff((0.0, 0.0), np.array([0.5, 0.5]), ideal, nadir) == 0.0


def test_moead_budget_and_determinism():
    cfg = MOEADConfig(eval_budget=500)
    ea = EAConfig(num_generations=1000, p_mutation=0.5, p_crossover=0.5, rng_seed=9)
    a = evolve_moead(toy_fitness, N_WP, [], cfg, ea)
    b = evolve_moead(toy_fitness, N_WP, [], cfg, ea)
    assert a.population == b.population
    assert a.evaluations >= 500
    assert sum(1 for r in a.log if r.generation < a.generations) < 500
    assert len(a.population) == cfg.n_subproblems


def test_moead_global_mating():
    cfg = MOEADConfig(n_subproblems=10, neighborhood_size=10, delta=0.0, eval_budget=200)
    res = evolve_moead(toy_fitness, N_WP, [], cfg, EAConfig(p_mutation=0.5, rng_seed=1))
    assert res.evaluations >= 200


# -- helpers -----------------------------------------------------------------


def test_normalization_examples():
    np.testing.assert_array_equal(objective_normalization([(3.0, 7.0)]), [[0.0, 0.0]])
    np.testing.assert_array_equal(objective_normalization([(0, 0), (1, 10)]), [[0, 0], [1, 1]])
    pts = np.array([(0.2, 5.0), (0.9, 1.0), (0.5, 3.0)])
    perm = [2, 0, 1]
    np.testing.assert_array_equal(objective_normalization(pts)[perm], objective_normalization(pts[perm]))


def test_memo_evaluator_logs_generation():
    memo = MemoEvaluator(toy_fitness)
    memo((1, 2), 0)
    memo((1, 2), 3)
    memo((2,), 3)
    assert memo.evaluations == 2
    assert [r.generation for r in memo.log] == [0, 3]


def test_pareto_oracle_agrees():
    rng = np.random.default_rng(0)
    pts = [tuple(x) for x in rng.integers(0, 5, (40, 2)).astype(float)]
    assert sorted(pareto_filter(pts)) == oracles.pairwise_pareto(pts)
