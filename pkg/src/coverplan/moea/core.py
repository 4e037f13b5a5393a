"""Genomes, variation operators and bookkeeping shared by both optimizers.

A genome is a tuple of waypoint IDs of any length (possibly empty, with
repeats allowed). Fitness is ``(coverage_score, energy)``, both minimized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from coverplan.errors import InvalidInputError
from coverplan.evaluation import Fitness

Genome = tuple


@dataclass(frozen=True)
class EAConfig:
    pop_size: int = 40
    num_generations: int = 400
    p_mutation: float = 0.1
    p_crossover: float = 0.1
    p_seeded: float = 0.0
    min_init_size: int = 2
    max_init_size: int = 20
    tournament_size: int = 2
    rng_seed: int = 0
    eval_budget: int | None = None

    def __post_init__(self):
        for name in ("p_mutation", "p_crossover", "p_seeded"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1]")
        if self.pop_size < 2:
            raise InvalidInputError("pop_size must be >= 2")
        if self.num_generations < 0:
            raise InvalidInputError("num_generations must be >= 0")
        if not 0 <= self.min_init_size <= self.max_init_size:
            raise InvalidInputError("need 0 <= min_init_size <= max_init_size")
        if self.tournament_size < 1:
            raise InvalidInputError("tournament_size must be >= 1")
        if self.eval_budget is not None and self.eval_budget < 1:
            raise InvalidInputError("eval_budget must be positive")


class Individual(NamedTuple):
    genome: Genome
    fitness: Fitness


class EvalRecord(NamedTuple):
    generation: int
    length: int
    coverage_score: float
    energy: float


@dataclass
class EvolutionResult:
    population: list[Individual]
    log: list[EvalRecord]
    evaluations: int
    generations: int
    config: dict = field(default_factory=dict)


def crossover(a: Sequence[int], b: Sequence[int], rng: np.random.Generator) -> tuple[Genome, Genome]:
    """One-point crossover cutting both parents at the same relative position.

    A shared fraction keeps equal parents unchanged and lets children of
    different-length parents take a head of one and a tail of the other.
    """
    u = float(rng.random())
    ca = int(u * (len(a) + 1))
    cb = int(u * (len(b) + 1))
    return tuple(a[:ca]) + tuple(b[cb:]), tuple(b[:cb]) + tuple(a[ca:])


MUTATIONS = ("insert", "delete", "replace")


def mutate_once(genome: Sequence[int], n_waypoints: int, rng: np.random.Generator, op: str | None = None) -> Genome:
    """Apply one insert/delete/replace edit (chosen uniformly unless ``op`` is given)."""
    g = list(genome)
    op = MUTATIONS[int(rng.integers(0, 3))] if op is None else op
    if op == "insert":
        g.insert(int(rng.integers(0, len(g) + 1)), int(rng.integers(0, n_waypoints)))
    elif op == "delete":
        if g:
            del g[int(rng.integers(0, len(g)))]
    elif op == "replace":
        if g:
            g[int(rng.integers(0, len(g)))] = int(rng.integers(0, n_waypoints))
    else:
        raise InvalidInputError(f"unknown mutation {op!r}")
    return tuple(g)


def mutate(genome: Sequence[int], n_waypoints: int, rng: np.random.Generator, p_mutation: float) -> Genome:
    if rng.random() < p_mutation:
        return mutate_once(genome, n_waypoints, rng)
    return tuple(genome)


def vary(a: Genome, b: Genome, n_waypoints: int, rng: np.random.Generator, cfg: EAConfig) -> tuple[Genome, Genome]:
    if rng.random() < cfg.p_crossover:
        a, b = crossover(a, b, rng)
    return mutate(a, n_waypoints, rng, cfg.p_mutation), mutate(b, n_waypoints, rng, cfg.p_mutation)


def random_genome(n_waypoints: int, rng: np.random.Generator, min_size: int, max_size: int) -> Genome:
    length = int(rng.integers(min_size, max_size + 1))
    return tuple(int(x) for x in rng.integers(0, n_waypoints, size=length))


def initialize_population(n_waypoints: int, seeds: Sequence[Genome], cfg: EAConfig, rng: np.random.Generator, size: int | None = None) -> list[Genome]:
    """Each member is a seed copy with probability ``p_seeded``, otherwise random."""
    seeds = [tuple(int(x) for x in s) for s in seeds]
    if cfg.p_seeded > 0 and not seeds:
        raise InvalidInputError("p_seeded > 0 needs a non-empty seed pool")
    out = []
    for _ in range(cfg.pop_size if size is None else size):
        if seeds and rng.random() < cfg.p_seeded:
            out.append(seeds[int(rng.integers(0, len(seeds)))])
        else:
            out.append(random_genome(n_waypoints, rng, cfg.min_init_size, cfg.max_init_size))
    return out


class MemoEvaluator:
    """Fitness memo for one run; ``evaluations`` counts actual evaluator calls."""

    def __init__(self, evaluate: Callable[[Genome], Fitness]):
        self._evaluate = evaluate
        self._memo: dict[Genome, Fitness] = {}
        self.evaluations = 0
        self.log: list[EvalRecord] = []

    def __call__(self, genome: Genome, generation: int) -> Fitness:
        fit = self._memo.get(genome)
        if fit is None:
            fit = Fitness(*self._evaluate(genome))
            self._memo[genome] = fit
            self.evaluations += 1
            self.log.append(EvalRecord(generation, len(genome), fit.coverage_score, fit.energy))
        return fit


def dominates(a, b) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def objective_normalization(points) -> np.ndarray:
    """Min-max scale each objective to [0, 1]; a constant objective maps to 0."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise InvalidInputError("need at least one point")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    out = np.zeros_like(pts)
    nz = span > 0
    out[:, nz] = (pts[:, nz] - lo[nz]) / span[nz]
    return out
