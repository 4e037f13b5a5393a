from __future__ import annotations

import numpy as np
import pytest

from coverplan.discretize import generate_candidate_waypoints
from coverplan.evaluation import PlanEvaluator
from coverplan.geometry import TriangleMesh, generate_box, generate_occluded_target, generate_sphere

# Filled by test_acceptance.py, echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def merge_meshes(*meshes: TriangleMesh) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriangleMesh.from_arrays(np.vstack(verts), np.vstack(tris))


@pytest.fixture(scope="session")
def sphere():
    return generate_sphere(10.0, 960)


@pytest.fixture(scope="session")
def sphere_grid(sphere):
    return generate_candidate_waypoints(sphere)


@pytest.fixture(scope="session")
def sphere_evaluator(sphere, sphere_grid):
    return PlanEvaluator(sphere, sphere_grid)


@pytest.fixture(scope="session")
def nested():
    return generate_occluded_target("nested-box")


@pytest.fixture(scope="session")
def nested_grid(nested):
    return generate_candidate_waypoints(nested.mesh)


@pytest.fixture(scope="session")
def nested_evaluator(nested, nested_grid):
    return PlanEvaluator(nested.mesh, nested_grid)


@pytest.fixture(scope="session")
def small_sphere():
    return generate_sphere(10.0, 192)


@pytest.fixture(scope="session")
def pillars():
    """Two separated 4x2x6 m pillars (coarse cells keep the count small)."""
    return merge_meshes(generate_box((-6, -1, 0), (-2, 1, 6), cell=2.0), generate_box((2, -1, 0), (6, 1, 6), cell=2.0))
