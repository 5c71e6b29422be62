"""Stochastic gamete formation and crossing.

Recombination is modeled as a first-order Markov walk over loci: within a
chromosome the copying phase flips between adjacent loci with the map's
per-interval switch probability (a Haldane-style marker-interval model, no
crossover interference), and an independent uniform phase is drawn at the
start of every chromosome. There is no mutation: every offspring allele is
one of its parents' alleles at that locus.

Reproducibility contract: a gamete consumes exactly one uniform draw per
chromosome plus one per locus, in that order, even where the switch
probability is zero. Batch crossing gives every offspring its own
sub-stream keyed by its position in the cross plan, so results are
independent of evaluation order, thread count, and parallel schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ActionError, ConfigError
from .genome import Genome, Population, RecombinationMap
from .rng import RngStream


@dataclass(frozen=True)
class CrossPlan:
    """Ordered list of (parent_a, parent_b) index pairs; one offspring each.

    Self-crosses (a == b) are allowed: selfing is standard practice.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if len(pairs) < 1:
            raise ActionError("a cross plan must contain at least one pair")
        if any(a < 0 or b < 0 for a, b in pairs):
            raise ActionError("parent indices must be nonnegative")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)


def _phase_walk(phase_draws: np.ndarray, switch_draws: np.ndarray,
                rmap: RecombinationMap) -> np.ndarray:
    """Resolve which chromosome copy each locus reads from, per gamete row.

    ``phase_draws`` is (rows, n_chromosomes) and ``switch_draws`` (rows, m),
    both uniform in [0, 1). Returns an integer (rows, m) phase matrix.
    """
    m = rmap.n_loci
    starts = np.asarray(rmap.chromosome_starts, dtype=np.int64)

    flips = switch_draws < rmap.switch_prob[None, :]
    flips[:, starts] = False  # chromosome starts take a fresh phase, not a flip

    seg_marker = np.zeros(m, dtype=np.int64)
    seg_marker[starts] = 1
    segment = np.cumsum(seg_marker) - 1

    start_phase = (phase_draws < 0.5).astype(np.int64)
    flip_count = np.cumsum(flips.astype(np.int64), axis=1)
    parity = (flip_count - flip_count[:, starts][:, segment]) & 1
    return start_phase[:, segment] ^ parity


def _gamete_draws(rmap: RecombinationMap, gen: np.random.Generator):
    # Fixed draw discipline per gamete: chromosome phases first, then one
    # uniform per locus (consumed even where no switch can occur), so replay
    # is exact.
    return gen.random(rmap.n_chromosomes), gen.random(rmap.n_loci)


def gamete(parent: Genome, rmap: RecombinationMap, rng: RngStream) -> np.ndarray:
    """Simulate one gamete: an (m,) boolean haploid drawn from the parent.

    Walks loci in ascending order; the output at locus i is the parent's
    allele on whichever chromosome copy the phase walk currently points to.
    """
    if parent.n_loci != rmap.n_loci:
        raise ConfigError(
            f"genome has {parent.n_loci} loci but map covers {rmap.n_loci}"
        )
    phase_draws, switch_draws = _gamete_draws(rmap, rng.generator())
    phase = _phase_walk(phase_draws[None, :], switch_draws[None, :], rmap)[0]
    return parent.alleles[np.arange(parent.n_loci), phase]


def cross(
    parent_a: Genome,
    parent_b: Genome,
    rmap: RecombinationMap,
    rng: RngStream,
) -> Genome:
    """Cross two plants: one recombined gamete from each parent.

    Column 0 of the offspring always comes from ``parent_a`` (fixed
    convention), column 1 from ``parent_b``. Both gametes draw sequentially
    from the given stream, the maternal one first.
    """
    if parent_a.n_loci != parent_b.n_loci:
        raise ConfigError(
            f"parents disagree on locus count: {parent_a.n_loci} vs {parent_b.n_loci}"
        )
    if parent_a.n_loci != rmap.n_loci:
        raise ConfigError(
            f"genome has {parent_a.n_loci} loci but map covers {rmap.n_loci}"
        )
    gen = rng.generator()
    phase_draws = np.empty((2, rmap.n_chromosomes))
    switch_draws = np.empty((2, rmap.n_loci))
    phase_draws[0], switch_draws[0] = _gamete_draws(rmap, gen)
    phase_draws[1], switch_draws[1] = _gamete_draws(rmap, gen)
    phase = _phase_walk(phase_draws, switch_draws, rmap)
    loci = np.arange(rmap.n_loci)
    from_a = parent_a.alleles[loci, phase[0]]
    from_b = parent_b.alleles[loci, phase[1]]
    return Genome(np.stack([from_a, from_b], axis=1))


def cross_batch(
    pop: Population,
    plan: CrossPlan,
    rmap: RecombinationMap,
    rng: RngStream,
) -> Population:
    """Execute a cross plan against a population.

    Returns a population of exactly ``len(plan)`` offspring with the
    generation index advanced by one. Offspring j draws from the sub-stream
    ``rng.child(j)``, so a plan evaluated serially, in any order, or across
    any number of workers produces bitwise-identical offspring.
    """
    n = pop.size
    for j, (a, b) in enumerate(plan.pairs):
        if not (0 <= a < n and 0 <= b < n):
            raise ActionError(
                f"cross {j} references parents ({a}, {b}) outside population of size {n}"
            )
    if pop.n_loci != rmap.n_loci:
        raise ConfigError(
            f"population has {pop.n_loci} loci but map covers {rmap.n_loci}"
        )

    # All 2l gametes resolved in one vectorized phase walk. Rows 2j and 2j+1
    # draw from the sub-stream (j,) in the same order as a cross() call for
    # pair j would, so both paths produce bitwise-identical populations.
    l = len(plan)
    m = rmap.n_loci
    phase_draws = np.empty((2 * l, rmap.n_chromosomes))
    switch_draws = np.empty((2 * l, m))
    parent_rows = np.empty(2 * l, dtype=np.int64)
    for j, (a, b) in enumerate(plan.pairs):
        gen = rng.child(j).generator()
        for side, parent in ((0, a), (1, b)):
            row = 2 * j + side
            phase_draws[row], switch_draws[row] = _gamete_draws(rmap, gen)
            parent_rows[row] = parent

    phase = _phase_walk(phase_draws, switch_draws, rmap)
    source = pop.genotypes[parent_rows]  # (2l, m, 2)
    haploids = np.take_along_axis(source, phase[:, :, None], axis=2)[:, :, 0]
    offspring = tuple(
        Genome(np.stack([haploids[2 * j], haploids[2 * j + 1]], axis=1))
        for j in range(l)
    )
    return Population(members=offspring, generation=pop.generation + 1)
