"""Evolutionary plan optimization: NSGA-II and MOEA/D."""

from coverplan.moea.core import (
    EAConfig,
    EvalRecord,
    EvolutionResult,
    Individual,
    crossover,
    initialize_population,
    mutate,
    mutate_once,
    objective_normalization,
    random_genome,
)
from coverplan.moea.moead import MOEADConfig, evolve_moead
from coverplan.moea.nsga2 import evolve_nsga2, non_dominated_sort, survival

__all__ = [
    "EAConfig",
    "EvalRecord",
    "EvolutionResult",
    "Individual",
    "MOEADConfig",
    "crossover",
    "evolve_moead",
    "evolve_nsga2",
    "initialize_population",
    "mutate",
    "mutate_once",
    "non_dominated_sort",
    "objective_normalization",
    "random_genome",
    "survival",
]
