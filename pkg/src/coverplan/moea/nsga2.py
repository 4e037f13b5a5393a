"""NSGA-II over variable-length waypoint genomes."""

from __future__ import annotations

from dataclasses import asdict
from typing import Callable, Sequence

import numpy as np

from coverplan.evaluation import Fitness
from coverplan.moea.core import (
    EAConfig,
    EvolutionResult,
    Genome,
    Individual,
    MemoEvaluator,
    dominates,
    initialize_population,
    vary,
)


def non_dominated_sort(fits: Sequence) -> list[list[int]]:
    """Fronts of indices, best first; order within a front follows input order."""
    n = len(fits)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(fits[i], fits[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(fits[j], fits[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(fits: Sequence, front: Sequence[int]) -> dict[int, float]:
    dist = {i: 0.0 for i in front}
    if len(front) <= 2:
        return {i: np.inf for i in front}
    for k in range(2):
        order = sorted(front, key=lambda i: fits[i][k])  # stable: ties keep front order
        lo, hi = fits[order[0]][k], fits[order[-1]][k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if hi == lo:
            continue
        for a, mid, b in zip(order[:-2], order[1:-1], order[2:]):
            dist[mid] += (fits[b][k] - fits[a][k]) / (hi - lo)
    return dist


def rank_and_crowding(fits: Sequence) -> tuple[list[int], list[float]]:
    rank = [0] * len(fits)
    crowd = [0.0] * len(fits)
    for r, front in enumerate(non_dominated_sort(fits)):
        for i, d in crowding_distance(fits, front).items():
            rank[i] = r
            crowd[i] = d
    return rank, crowd


def survival(fits: Sequence, size: int) -> list[int]:
    """Indices kept by elitist selection: whole fronts, then the least crowded of the split front."""
    keep: list[int] = []
    for front in non_dominated_sort(fits):
        if len(keep) + len(front) <= size:
            keep.extend(front)
            continue
        crowd = crowding_distance(fits, front)
        order = sorted(front, key=lambda i: -crowd[i])
        keep.extend(order[: size - len(keep)])
        break
    return keep


def tournament(rank, crowd, rng: np.random.Generator, size: int = 2) -> int:
    """Best of ``size`` random picks: lower rank, then larger crowding, then first drawn."""
    picks = [int(rng.integers(0, len(rank))) for _ in range(size)]
    best = picks[0]
    for p in picks[1:]:
        if rank[p] < rank[best] or (rank[p] == rank[best] and crowd[p] > crowd[best]):
            best = p
    return best


def evolve_nsga2(
    evaluate: Callable[[Genome], Fitness],
    n_waypoints: int,
    seeds: Sequence[Genome],
    cfg: EAConfig,
    on_generation: Callable[[int, list[Individual]], None] | None = None,
) -> EvolutionResult:
    """Run NSGA-II; ``evaluate`` maps a genome to (coverage_score, energy).

    Offspring identical to an already evaluated genome (in particular, copies
    of their parents) reuse the stored fitness. With ``eval_budget`` set the
    run stops at the end of the generation that reaches the budget.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    memo = MemoEvaluator(evaluate)
    genomes = initialize_population(n_waypoints, seeds, cfg, rng)
    pop = [Individual(g, memo(g, 0)) for g in genomes]
    if on_generation:
        on_generation(0, pop)
    gen = 0
    while gen < cfg.num_generations and not (cfg.eval_budget and memo.evaluations >= cfg.eval_budget):
        gen += 1
        fits = [ind.fitness for ind in pop]
        rank, crowd = rank_and_crowding(fits)
        offspring = []
        while len(offspring) < cfg.pop_size:
            a = pop[tournament(rank, crowd, rng, cfg.tournament_size)].genome
            b = pop[tournament(rank, crowd, rng, cfg.tournament_size)].genome
            for child in vary(a, b, n_waypoints, rng, cfg):
                if len(offspring) < cfg.pop_size:
                    offspring.append(Individual(child, memo(child, gen)))
        merged = pop + offspring
        pop = [merged[i] for i in survival([ind.fitness for ind in merged], cfg.pop_size)]
        if on_generation:
            on_generation(gen, pop)
    return EvolutionResult(pop, memo.log, memo.evaluations, gen, asdict(cfg))
