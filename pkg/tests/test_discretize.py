import json

import numpy as np
import pytest

from coverplan.discretize import compute_wp_interval, generate_candidate_waypoints, padded_box
from coverplan.errors import InvalidInputError
from coverplan.geometry import TriangleMesh, generate_box, generate_sphere


def box_mesh(lo, hi):
    return generate_box(lo, hi, cell=min(np.subtract(hi, lo)))


def test_identity_volume():
    # padded box 10 x 10 x 10 from a 10 x 10 x 10 box with no padding
    mesh = box_mesh((0, 0, 0), (10, 10, 10))
    assert compute_wp_interval(mesh, pad=0.0, volume_scaling=1000) == pytest.approx(1.0, abs=1e-12)


def test_sphere_interval(sphere):
    box = padded_box(sphere, 4.0)
    np.testing.assert_allclose(box[1] - box[0], [28, 28, 24], atol=1e-9)
    assert compute_wp_interval(sphere) == pytest.approx(2.662, abs=0.003)
    assert compute_wp_interval(sphere) == pytest.approx(np.cbrt(28 * 28 * 24 / 1000), rel=1e-12)


def test_scaling_by_eight_halves_interval(sphere):
    assert compute_wp_interval(sphere, volume_scaling=8000) == pytest.approx(compute_wp_interval(sphere) / 2, rel=1e-12)


def test_zero_volume_rejected():
    flat = TriangleMesh.from_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    with pytest.raises(InvalidInputError):
        compute_wp_interval(flat, pad=0.0)


def test_sphere_waypoint_count(sphere_grid):
    assert 700 <= len(sphere_grid) <= 2300


def test_positions_on_lattice(sphere_grid):
    g = sphere_grid
    np.testing.assert_allclose(g.positions, g.grid_origin + g.grid_coords * g.wp_interval, atol=1e-9)


def test_buffer_and_floor(sphere, sphere_grid):
    assert sphere_grid.positions[:, 2].min() >= sphere.bbox[0, 2]
    assert sphere_grid.clearance.min() >= 2.0
    np.testing.assert_allclose(sphere_grid.clearance, sphere.point_distances(sphere_grid.positions))


def test_buffer_removes_exactly_the_close_points(sphere):
    full = generate_candidate_waypoints(sphere, buffer=0.0)
    kept = generate_candidate_waypoints(sphere, buffer=2.0)
    assert len(full) - len(kept) == int((full.clearance < 2.0).sum())


def test_zero_buffer_removes_nothing_far_from_mesh():
    # a tiny mesh in a big padded box: with buffer 0 the full lattice survives
    mesh = box_mesh((0, 0, 0), (0.5, 0.5, 0.5))
    grid = generate_candidate_waypoints(mesh, pad=4.0, buffer=0.0, volume_scaling=100)
    assert len(grid) == int(np.prod(grid.shape))


def test_deterministic(sphere):
    a = generate_candidate_waypoints(sphere)
    b = generate_candidate_waypoints(sphere)
    assert a.to_json() == b.to_json()


def test_json_export(sphere_grid):
    data = json.loads(sphere_grid.to_json())
    assert len(data["waypoints"]) == len(sphere_grid)
    w = data["waypoints"][5]
    assert w["id"] == 5
    assert w["position"] == list(sphere_grid.waypoint(5).position)


def test_counts_similar_across_targets(sphere):
    counts = [
        len(generate_candidate_waypoints(m))
        for m in (sphere, generate_sphere(20.0, 960), box_mesh((0, 0, 0), (40, 40, 40)))
    ]
    assert max(counts) / min(counts) < 3


def test_pad_smaller_than_buffer_rejected(sphere):
    with pytest.raises(InvalidInputError):
        generate_candidate_waypoints(sphere, pad=1.0, buffer=2.0)
