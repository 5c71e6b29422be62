"""Seeded crop-breeding simulator with episodic RL environments.

Simulates multi-generation breeding programs over diploid SNP genomes with
stochastic recombination and linear trait models, exposes them as episodic
environments, and ships genomic-selection baselines plus a PPO trainer for
learning non-myopic selection scores.
"""

__version__ = "0.1.0"

from .data_io import FounderDataset, load_dataset, subset_markers, synthesize_founders
from .envs import (
    BreedingGym,
    PairScore,
    SelectionScores,
    SimplifiedBreedingGym,
    StepResult,
    env_from_config,
    make_env,
)
from .genome import (
    Genome,
    Population,
    RecombinationMap,
    TraitModel,
    aggregate,
    dosage,
    estimate_trait,
    genome_correlation,
    optimal_haploid_value,
    weighted_observation,
)
from .meiosis import CrossPlan, cross, cross_batch, gamete
from .rng import RngStream

__all__ = [
    "BreedingGym",
    "CrossPlan",
    "FounderDataset",
    "Genome",
    "PairScore",
    "Population",
    "RecombinationMap",
    "RngStream",
    "SelectionScores",
    "SimplifiedBreedingGym",
    "StepResult",
    "TraitModel",
    "aggregate",
    "cross",
    "cross_batch",
    "dosage",
    "env_from_config",
    "estimate_trait",
    "gamete",
    "genome_correlation",
    "load_dataset",
    "make_env",
    "optimal_haploid_value",
    "subset_markers",
    "synthesize_founders",
    "weighted_observation",
    "__version__",
]
