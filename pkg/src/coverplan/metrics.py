"""Two-objective Pareto utilities: filtering, hypervolume, attainment surfaces.

Both objectives, coverage_score and energy, are minimized.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from coverplan.errors import InvalidInputError

REF_SCALE = 1.01
REF_FLOOR = 0.01
COVERAGE_REF_MIN = 1.01
SURFACE_THRESHOLDS = 101


class FrontPoint(NamedTuple):
    coverage_score: float
    energy: float
    plan_ref: object = None


class ReferencePoint(NamedTuple):
    coverage_ref: float
    energy_ref: float


def _xy(points) -> np.ndarray:
    return np.array([(float(p[0]), float(p[1])) for p in points], dtype=np.float64).reshape(-1, 2)


def pareto_filter(points: Sequence) -> list:
    """Mutually non-dominated subset, sorted by coverage_score then energy.

    Of several identical points only the first is kept.
    """
    pts = list(points)
    order = sorted(range(len(pts)), key=lambda i: (float(pts[i][0]), float(pts[i][1]), i))
    out = []
    best_energy = np.inf
    for i in order:
        e = float(pts[i][1])
        if e < best_energy:
            out.append(pts[i])
            best_energy = e
    return out


def hypervolume_2d(points: Sequence, ref) -> float:
    """Area dominated by ``points`` and bounded by ``ref`` (sorted sweep)."""
    rx, ry = float(ref[0]), float(ref[1])
    xy = _xy(points)
    for p in xy:
        if p[0] > rx or p[1] > ry:
            raise InvalidInputError(f"point ({p[0]}, {p[1]}) lies beyond the reference point ({rx}, {ry})")
    parts = []
    prev_y = ry
    for x, y in _xy(pareto_filter(xy)):
        if y < prev_y:
            parts.append((rx - x) * (prev_y - y))
            prev_y = y
    # fsum keeps archive curves from wobbling by an ulp as slices get split
    return math.fsum(parts)


def choose_reference_point(points: Iterable) -> ReferencePoint:
    """Per objective the observed maximum times 1.01 (0.01 if that maximum is 0).

    The coverage reference is at least 1.01 because 1.0 is the worst
    possible coverage score.
    """
    xy = _xy(points)
    if len(xy) == 0:
        raise InvalidInputError("need at least one point")
    mx = xy.max(axis=0)
    ref = np.where(mx > 0, mx * REF_SCALE, REF_FLOOR)
    return ReferencePoint(max(float(ref[0]), COVERAGE_REF_MIN), float(ref[1]))


def archive_hypervolumes(records: Sequence, ref, generations: int | None = None) -> list[float]:
    """Hypervolume of the cumulative non-dominated archive after each generation.

    ``records`` carry ``generation``, ``coverage_score`` and ``energy``
    attributes (one per evaluation).
    """
    if not records:
        return []
    last = max(r.generation for r in records) if generations is None else generations
    by_gen: dict[int, list] = {}
    for r in records:
        by_gen.setdefault(r.generation, []).append((r.coverage_score, r.energy))
    archive: list = []
    out = []
    for g in range(last + 1):
        archive = pareto_filter(archive + by_gen.get(g, []))
        out.append(hypervolume_2d(archive, ref))
    return out


def attainment_curve(points: Sequence, thresholds) -> np.ndarray:
    """Least energy among points with coverage_score <= each threshold (inf if none)."""
    xy = _xy(points)
    out = np.full(len(thresholds), np.inf)
    for k, t in enumerate(thresholds):
        sel = xy[xy[:, 0] <= t]
        if len(sel):
            out[k] = sel[:, 1].min()
    return out


def attainment_surfaces(runs: Sequence[Sequence], thresholds=None) -> dict[str, np.ndarray]:
    """Best, median and worst attainment surfaces over several runs.

    Each surface maps a coverage_score threshold to the energy attained by
    that fraction of runs. The median of an even number of runs is the
    lower-middle order statistic, so every surface value is attained by
    some run.
    """
    if not runs:
        raise InvalidInputError("need at least one run")
    thresholds = np.linspace(0.0, 1.0, SURFACE_THRESHOLDS) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    curves = np.sort(np.stack([attainment_curve(r, thresholds) for r in runs]), axis=0)
    return {
        "thresholds": thresholds,
        "best": curves[0],
        "median": curves[(len(runs) - 1) // 2],
        "worst": curves[-1],
    }
