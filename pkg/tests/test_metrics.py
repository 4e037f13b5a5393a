import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from coverplan.errors import InvalidInputError
from coverplan.metrics import (
    FrontPoint,
    archive_hypervolumes,
    attainment_curve,
    attainment_surfaces,
    choose_reference_point,
    hypervolume_2d,
    pareto_filter,
)
from coverplan.moea.core import EvalRecord

REF = (1.1, 110.0)
point = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 100.0))
fronts = st.lists(point, min_size=1, max_size=30)


def random_front(rng, n):
    x = np.sort(rng.random(n))
    y = np.sort(rng.random(n) * 100)[::-1]
    return list(zip(x, y))


# -- filtering ---------------------------------------------------------------


def test_pareto_filter_examples():
    assert pareto_filter([(0.5, 10.0), (0.4, 20.0), (0.6, 5.0), (0.6, 30.0)]) == [(0.4, 20.0), (0.5, 10.0), (0.6, 5.0)]
    assert pareto_filter([]) == []


def test_duplicates_keep_first():
    a = FrontPoint(0.5, 10.0, "first")
    b = FrontPoint(0.5, 10.0, "second")
    assert pareto_filter([a, b]) == [a]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), max_size=30))
def test_pareto_filter_matches_pairwise(pts):
    assert [tuple(map(float, p)) for p in pareto_filter(pts)] == oracles.pairwise_pareto(pts)


# -- hypervolume -------------------------------------------------------------


def test_hypervolume_two_points():
    assert hypervolume_2d([(1, 2), (2, 1)], (3, 3)) == 3.0


def test_point_at_reference_adds_nothing():
    assert hypervolume_2d([(3, 3)], (3, 3)) == 0.0
    assert hypervolume_2d([], (3, 3)) == 0.0


def test_point_beyond_reference_names_it():
    with pytest.raises(InvalidInputError, match=r"3\.5"):
        hypervolume_2d([(1, 1), (3.5, 0.5)], (3, 3))


def test_hypervolume_against_monte_carlo():
    rng = np.random.default_rng(0)
    for k in range(100):
        front = random_front(rng, int(rng.integers(1, 15)))
        exact = hypervolume_2d(front, REF)
        mc = oracles.monte_carlo_hv(front, REF, n=1_000_000, seed=k)
        assert exact == pytest.approx(mc, rel=0.005)


@settings(max_examples=200, deadline=None)
@given(fronts, point)
def test_adding_points_never_shrinks(front, extra):
    assert hypervolume_2d(front + [extra], REF) >= hypervolume_2d(front, REF) - 1e-9


@settings(max_examples=200, deadline=None)
@given(fronts)
def test_dominated_points_do_not_count(front):
    assert hypervolume_2d(front, REF) == pytest.approx(hypervolume_2d(pareto_filter(front), REF), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(fronts, st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_scaling_scales_area(front, sx, sy):
    scaled = [(x * sx, y * sy) for x, y in front]
    assert hypervolume_2d(scaled, (REF[0] * sx, REF[1] * sy)) == pytest.approx(hypervolume_2d(front, REF) * sx * sy, rel=1e-9, abs=1e-9)


# -- reference point ---------------------------------------------------------


def test_reference_point_examples():
    assert choose_reference_point([(0.2, 100.0), (0.5, 50.0)]) == pytest.approx((1.01, 101.0))
    assert choose_reference_point([(1.0, 0.0)]) == pytest.approx((1.01, 0.01))


def test_reference_point_needs_points():
    with pytest.raises(InvalidInputError):
        choose_reference_point([])


def test_archive_hypervolume_fills_empty_generations():
    recs = [EvalRecord(0, 2, 0.5, 10.0), EvalRecord(2, 3, 0.2, 20.0)]
    hv = archive_hypervolumes(recs, (1.0, 30.0))
    assert hv == pytest.approx([10.0, 10.0, 10.0 + 0.3 * 10.0])
    assert len(archive_hypervolumes(recs, (1.0, 30.0), generations=5)) == 6


# -- attainment --------------------------------------------------------------


def test_single_run_surface_is_its_front():
    run = [(0.2, 30.0), (0.5, 10.0), (0.8, 5.0)]
    t = np.array([0.1, 0.2, 0.6, 1.0])
    s = attainment_surfaces([run], t)
    expected = [np.inf, 30.0, 10.0, 5.0]
    for k in ("best", "median", "worst"):
        np.testing.assert_array_equal(s[k], expected)


def test_dominating_run_sets_best():
    good = [(0.1, 1.0)]
    bad = [(0.5, 50.0)]
    s = attainment_surfaces([bad, good])
    np.testing.assert_array_equal(s["best"], attainment_curve(good, s["thresholds"]))
    np.testing.assert_array_equal(s["worst"], attainment_curve(bad, s["thresholds"]))


def test_surfaces_are_ordered_and_monotone():
    rng = np.random.default_rng(3)
    runs = [random_front(rng, int(rng.integers(1, 10))) for _ in range(7)]
    s = attainment_surfaces(runs)
    assert np.all(s["best"] <= s["median"]) and np.all(s["median"] <= s["worst"])
    for k in ("best", "median", "worst"):
        finite = s[k][np.isfinite(s[k])]
        assert np.all(np.diff(finite) <= 0)


def test_surfaces_need_runs():
    with pytest.raises(InvalidInputError):
        attainment_surfaces([])
