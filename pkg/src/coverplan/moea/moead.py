"""MOEA/D with Tchebycheff decomposition over waypoint genomes."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from coverplan.errors import InvalidInputError
from coverplan.evaluation import Fitness
from coverplan.moea.core import EAConfig, EvolutionResult, Genome, Individual, MemoEvaluator, initialize_population, vary

_MIN_WEIGHT = 1e-6


@dataclass(frozen=True)
class MOEADConfig:
    n_subproblems: int = 40
    neighborhood_size: int = 10
    delta: float = 0.8
    scalarizer: str = "tchebycheff"
    replacement_limit: int = 2
    eval_budget: int = 3073

    def __post_init__(self):
        if self.n_subproblems < 2:
            raise InvalidInputError("n_subproblems must be >= 2")
        if not 1 <= self.neighborhood_size <= self.n_subproblems:
            raise InvalidInputError("need 1 <= neighborhood_size <= n_subproblems")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidInputError("delta must be in [0, 1]")
        if self.scalarizer != "tchebycheff":
            raise InvalidInputError("only the tchebycheff scalarizer is supported")
        if self.replacement_limit < 1 or self.eval_budget < 1:
            raise InvalidInputError("replacement_limit and eval_budget must be >= 1")


def weight_vectors(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)
    return np.maximum(np.stack([t, 1.0 - t], axis=1), _MIN_WEIGHT)


def neighborhoods(weights: np.ndarray, size: int) -> np.ndarray:
    d = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=2)
    return np.argsort(d, axis=1, kind="stable")[:, :size]


def tchebycheff(f, weight, ideal, nadir) -> float:
    """max_k w_k |f_k - z*_k| on objectives scaled by the ideal-to-nadir range."""
    span = np.where(nadir - ideal > 0, nadir - ideal, 1.0)
    return float(np.max(weight * np.abs((np.asarray(f) - ideal) / span)))


def evolve_moead(
    evaluate: Callable[[Genome], Fitness],
    n_waypoints: int,
    seeds: Sequence[Genome],
    cfg: MOEADConfig,
    ea_cfg: EAConfig,
    on_generation: Callable[[int, list[Individual]], None] | None = None,
) -> EvolutionResult:
    """Run MOEA/D until the generation in which ``cfg.eval_budget`` evaluations are reached.

    Variation reuses the NSGA-II operators and rates from ``ea_cfg``; one
    offspring (the first child) is produced per subproblem per generation.
    ``ea_cfg.num_generations`` caps the run in case the budget is never met.
    """
    rng = np.random.default_rng(ea_cfg.rng_seed)
    memo = MemoEvaluator(evaluate)
    n = cfg.n_subproblems
    weights = weight_vectors(n)
    hood = neighborhoods(weights, cfg.neighborhood_size)
    pop = [Individual(g, memo(g, 0)) for g in initialize_population(n_waypoints, seeds, ea_cfg, rng, size=n)]
    ideal = np.min([ind.fitness for ind in pop], axis=0)
    if on_generation:
        on_generation(0, pop)
    gen = 0
    while memo.evaluations < cfg.eval_budget and gen < ea_cfg.num_generations:
        gen += 1
        for i in range(n):
            pool = hood[i] if rng.random() < cfg.delta else np.arange(n)
            a, b = (int(pool[int(rng.integers(0, len(pool)))]) for _ in range(2))
            child = vary(pop[a].genome, pop[b].genome, n_waypoints, rng, ea_cfg)[0]
            fit = memo(child, gen)
            ideal = np.minimum(ideal, fit)
            nadir = np.max([ind.fitness for ind in pop], axis=0)
            replaced = 0
            for j in rng.permutation(pool):
                if replaced >= cfg.replacement_limit:
                    break
                j = int(j)
                if tchebycheff(fit, weights[j], ideal, nadir) < tchebycheff(pop[j].fitness, weights[j], ideal, nadir):
                    pop[j] = Individual(child, fit)
                    replaced += 1
        if on_generation:
            on_generation(gen, pop)
    return EvolutionResult(pop, memo.log, memo.evaluations, gen, {"moead": asdict(cfg), "ea": asdict(ea_cfg)})
