"""Genome, population, and trait-model types with deterministic genetic arithmetic.

A plant genome is a boolean (m, 2) matrix: m SNP loci on two chromosome
copies. Traits follow a linear marker-effect model, so the estimated trait
(the GEBV) of a plant is the effect-weighted sum of its allele dosages.

All arithmetic here is pure and bitwise reproducible. Summations that define
trait values run in ascending locus order (see :func:`ordered_sum`), so the
results of the vectorized implementations are identical, bit for bit, to a
naive scalar loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, StatisticError


def ordered_sum(values: np.ndarray, axis: int = -1) -> np.ndarray | float:
    """Sum in ascending index order along ``axis``.

    Uses a running (cumulative) sum, which accumulates strictly left to
    right. This pins the floating-point rounding sequence so that vectorized
    results match a scalar ``for`` loop exactly; plain ``np.sum`` does not
    (it reduces pairwise). The unit tests assert this equivalence.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[axis] == 0:
        raise ConfigError("cannot sum an empty axis")
    out = np.cumsum(values, axis=axis)
    return np.take(out, -1, axis=axis)


@dataclass(frozen=True)
class Genome:
    """Diploid SNP genome: ``alleles[i, c]`` is the state of locus i on copy c."""

    alleles: np.ndarray

    def __post_init__(self):
        alleles = np.asarray(self.alleles)
        if alleles.ndim != 2 or alleles.shape[1] != 2 or alleles.shape[0] < 1:
            raise ConfigError(f"genome must have shape (m, 2) with m >= 1, got {alleles.shape}")
        if alleles.dtype != np.bool_:
            if not np.isin(alleles, (0, 1)).all():
                raise ConfigError("genome alleles must be strictly binary")
            alleles = alleles.astype(np.bool_)
        alleles = np.ascontiguousarray(alleles)
        alleles.flags.writeable = False
        object.__setattr__(self, "alleles", alleles)

    @property
    def n_loci(self) -> int:
        return self.alleles.shape[0]


@dataclass(frozen=True)
class Population:
    """Ordered collection of genomes at one breeding generation.

    Member order is significant: environment actions address plants by index.
    """

    members: tuple[Genome, ...]
    generation: int = 0

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 1:
            raise ConfigError("population must contain at least one genome")
        m = members[0].n_loci
        for i, g in enumerate(members):
            if g.n_loci != m:
                raise ConfigError(f"member {i} has {g.n_loci} loci, expected {m}")
        if self.generation < 0:
            raise ConfigError("generation index must be nonnegative")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def n_loci(self) -> int:
        return self.members[0].n_loci

    @cached_property
    def genotypes(self) -> np.ndarray:
        """Stacked (n, m, 2) boolean tensor of all member genomes."""
        out = np.stack([g.alleles for g in self.members])
        out.flags.writeable = False
        return out


@dataclass(frozen=True)
class TraitModel:
    """Linear marker-effect model: trait units contributed per allele copy."""

    weights: np.ndarray
    trait_name: str = "trait"
    trait_unit: str = "au"

    def __post_init__(self):
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.shape[0] < 1:
            raise ConfigError("trait model weights must be a nonempty vector")
        if not np.isfinite(weights).all():
            raise ConfigError("trait model weights must all be finite")
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    @property
    def n_loci(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class RecombinationMap:
    """Per-locus phase-switch probabilities plus chromosome boundaries.

    ``switch_prob[i]`` is the probability that gamete copying flips parental
    haplotype between locus i-1 and locus i. Entry 0 is unused and fixed to
    zero. Chromosome starts carry probability 0.5 (independent assortment);
    the copying phase is freshly drawn there anyway.
    """

    switch_prob: np.ndarray
    chromosome_starts: tuple[int, ...] = (0,)

    def __post_init__(self):
        probs = np.ascontiguousarray(self.switch_prob, dtype=np.float64)
        starts = tuple(int(s) for s in self.chromosome_starts)
        if probs.ndim != 1 or probs.shape[0] < 1:
            raise ConfigError("switch probabilities must be a nonempty vector")
        if probs[0] != 0.0:
            raise ConfigError("switch_prob[0] is unused and must be 0")
        if ((probs < 0.0) | (probs > 0.5)).any():
            raise ConfigError("switch probabilities must lie in [0, 0.5]")
        if starts != tuple(sorted(set(starts))) or 0 not in starts:
            raise ConfigError("chromosome starts must be sorted, unique, and contain 0")
        if any(s < 0 or s >= probs.shape[0] for s in starts):
            raise ConfigError("chromosome start out of locus range")
        for s in starts:
            if s > 0 and probs[s] != 0.5:
                raise ConfigError(f"switch_prob[{s}] must be 0.5 at a chromosome start")
        probs.flags.writeable = False
        object.__setattr__(self, "switch_prob", probs)
        object.__setattr__(self, "chromosome_starts", starts)

    @property
    def n_loci(self) -> int:
        return self.switch_prob.shape[0]

    @property
    def n_chromosomes(self) -> int:
        return len(self.chromosome_starts)


@dataclass(frozen=True)
class CorrelationResult:
    """Per-plant genome correlations plus degenerate-input flags.

    ``zero_variance[i]`` marks plants whose correlation was undefined
    (constant dosage profile, or a constant population mean profile); their
    value is reported as 0 rather than raising, so environments never crash
    on degenerate populations mid-episode.
    """

    values: np.ndarray
    zero_variance: np.ndarray


def _check_dims(n_loci: int, model: TraitModel) -> None:
    if model.n_loci != n_loci:
        raise ConfigError(f"trait model has {model.n_loci} weights for {n_loci} loci")


def dosage(genome: Genome) -> np.ndarray:
    """Per-locus count of the alternate allele: values in {0, 1, 2}."""
    return genome.alleles.sum(axis=1, dtype=np.int64)


def population_dosages(pop: Population) -> np.ndarray:
    """(n, m) dosage matrix for a whole population."""
    return pop.genotypes.sum(axis=2, dtype=np.int64)


def estimate_trait(genome: Genome, model: TraitModel) -> float:
    """Estimated trait value: weighted allele dosage, summed in locus order."""
    _check_dims(genome.n_loci, model)
    products = model.weights * dosage(genome).astype(np.float64)
    return float(ordered_sum(products))


def population_traits(pop: Population, model: TraitModel) -> np.ndarray:
    """Estimated trait of every member; bitwise equal to per-member calls."""
    _check_dims(pop.n_loci, model)
    products = population_dosages(pop).astype(np.float64) * model.weights[None, :]
    return ordered_sum(products, axis=1)


def optimal_haploid_value(genome: Genome, model: TraitModel, block_size: int = 1) -> float:
    """Trait of the best doubled haploid derivable from this plant.

    Takes the better weighted allele at each haplotype block and doubles the
    total. Block size 1 scores each locus independently; larger blocks keep
    runs of adjacent loci on the same parental haplotype.
    """
    _check_dims(genome.n_loci, model)
    if block_size < 1:
        raise ConfigError("block size must be >= 1")
    weighted = model.weights[:, None] * genome.alleles.astype(np.float64)
    if block_size == 1:
        best = np.maximum(weighted[:, 0], weighted[:, 1])
    else:
        m = genome.n_loci
        best = np.empty(m, dtype=np.float64)
        for lo in range(0, m, block_size):
            hi = min(lo + block_size, m)
            totals = ordered_sum(weighted[lo:hi, :], axis=0)
            pick = 0 if totals[0] >= totals[1] else 1
            best[lo:hi] = weighted[lo:hi, pick]
    return float(2.0 * ordered_sum(best))


def population_ohv(pop: Population, model: TraitModel) -> np.ndarray:
    """Optimal haploid value of every member (block size 1)."""
    _check_dims(pop.n_loci, model)
    weighted = weighted_observation(pop, model)
    best = np.maximum(weighted[:, :, 0], weighted[:, :, 1])
    return 2.0 * ordered_sum(best, axis=1)


def genome_correlation(pop: Population) -> CorrelationResult:
    """Pearson correlation of each plant's dosage profile with the population mean.

    Values near 1 mean the plant is genomically close to the population
    average; diverse populations spread the values out. Undefined
    correlations (zero variance on either side) are reported as 0 and
    flagged.
    """
    if pop.size < 2:
        raise StatisticError("genome correlation needs a population of size >= 2")
    d = population_dosages(pop).astype(np.float64)
    mean_profile = d.mean(axis=0)
    mc = mean_profile - mean_profile.mean()
    mvar = float(mc @ mc)
    dc = d - d.mean(axis=1, keepdims=True)
    pvar = np.einsum("ij,ij->i", dc, dc)
    denom = np.sqrt(pvar * mvar)
    degenerate = denom == 0.0
    values = np.zeros(pop.size, dtype=np.float64)
    ok = ~degenerate
    if ok.any():
        values[ok] = (dc[ok] @ mc) / denom[ok]
    return CorrelationResult(values=values, zero_variance=degenerate)


def aggregate(values: np.ndarray, kind: str) -> float:
    """Reduce a trait vector to a scalar: exact max or arithmetic mean."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty vector")
    if kind == "max":
        return float(values.max())
    if kind == "mean":
        return float(values.mean())
    raise ValueError(f"unknown aggregation {kind!r}; expected 'max' or 'mean'")


def weighted_observation(pop: Population, model: TraitModel) -> np.ndarray:
    """(n, m, 2) tensor of effect-weighted alleles.

    Entry (i, j, c) is ``weights[j] * alleles_i[j, c]``, so summing a plant's
    slab (channel pair first, then ascending loci; see
    :func:`observation_trait_sums`) reproduces its estimated trait exactly.
    """
    _check_dims(pop.n_loci, model)
    return model.weights[None, :, None] * pop.genotypes.astype(np.float64)


def observation_trait_sums(observation: np.ndarray) -> np.ndarray:
    """Per-plant trait values recovered from a weighted observation tensor.

    Sums the two channels per locus, then the loci in ascending order. This
    ordering makes the result bitwise identical to :func:`estimate_trait`.
    """
    observation = np.asarray(observation, dtype=np.float64)
    if observation.ndim != 3 or observation.shape[2] != 2:
        raise ConfigError(f"expected an (n, m, 2) observation, got {observation.shape}")
    return ordered_sum(observation.sum(axis=2), axis=1)
