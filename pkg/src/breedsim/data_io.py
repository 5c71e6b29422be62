"""Founder-dataset ingestion, synthetic data generation, and episode logging.

File formats (both plain text, diffable, loss-free):

* Genotype file: one individual per row; one whitespace-separated two-character
  diplotype token per locus, from {"00", "01", "10", "11"} (first character =
  chromosome copy 0, second = copy 1).
* Marker file: headered CSV with columns ``name,chrom,pos_cM,weight``: one
  SNP per row, positions in centimorgans, non-decreasing within each
  chromosome. Rows follow genome order; chromosome blocks are contiguous.

Switch probabilities come from adjacent marker distances through the Haldane
map function r = (1 - exp(-2 d / 100)) / 2, with 0.5 at chromosome
boundaries. Episode logs are CSV with full-precision (round-trippable)
decimal floats.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .genome import Genome, RecombinationMap, TraitModel
from .rng import RngStream

GENOTYPE_TOKENS = {"00": (0, 0), "01": (0, 1), "10": (1, 0), "11": (1, 1)}
MARKER_HEADER = ["name", "chrom", "pos_cM", "weight"]
EPISODE_LOG_HEADER = [
    "seed",
    "generation",
    "best_trait",
    "mean_trait",
    "trait_std",
    "mean_genome_correlation",
]


@dataclass(frozen=True)
class FounderDataset:
    """A founder pool plus the trait model and genetic map that go with it."""

    genotypes: tuple[Genome, ...]
    model: TraitModel
    map: RecombinationMap
    marker_names: tuple[str, ...]
    chromosomes: tuple[str, ...]
    positions_cM: np.ndarray

    def __post_init__(self):
        m = self.model.n_loci
        if len(self.genotypes) < 1:
            raise ConfigError("founder pool must be nonempty")
        if any(g.n_loci != m for g in self.genotypes):
            raise ConfigError("founder genomes disagree with the trait model on locus count")
        if self.map.n_loci != m or len(self.marker_names) != m:
            raise ConfigError("map and marker names must cover every locus")
        if len(self.chromosomes) != m or len(self.positions_cM) != m:
            raise ConfigError("chromosome labels and positions must cover every locus")
        positions = np.ascontiguousarray(self.positions_cM, dtype=np.float64)
        positions.flags.writeable = False
        object.__setattr__(self, "genotypes", tuple(self.genotypes))
        object.__setattr__(self, "marker_names", tuple(self.marker_names))
        object.__setattr__(self, "chromosomes", tuple(self.chromosomes))
        object.__setattr__(self, "positions_cM", positions)

    @property
    def n_founders(self) -> int:
        return len(self.genotypes)

    @property
    def n_loci(self) -> int:
        return self.model.n_loci


_HALF_OPEN = float(np.nextafter(0.5, 0.0))


def haldane_switch_prob(distance_cM: float) -> float:
    """Recombination frequency between two markers ``distance_cM`` apart.

    Strictly below 0.5 for any finite distance; the cap keeps that true in
    floating point, so only chromosome boundaries carry probability 0.5.
    """
    if distance_cM < 0:
        raise ConfigError("marker distance must be nonnegative")
    return min(-0.5 * math.expm1(-2.0 * distance_cM / 100.0), _HALF_OPEN)


def map_from_positions(chromosomes, positions_cM) -> RecombinationMap:
    """Derive the phase-switch map from marker chromosome labels and positions."""
    chromosomes = list(chromosomes)
    positions = np.asarray(positions_cM, dtype=np.float64)
    m = len(chromosomes)
    switch = np.zeros(m, dtype=np.float64)
    starts = [0]
    for i in range(1, m):
        if chromosomes[i] != chromosomes[i - 1]:
            switch[i] = 0.5
            starts.append(i)
        else:
            switch[i] = haldane_switch_prob(positions[i] - positions[i - 1])
    return RecombinationMap(switch_prob=switch, chromosome_starts=tuple(starts))


def _read_marker_file(path):
    names: list[str] = []
    chroms: list[str] = []
    positions: list[float] = []
    weights: list[float] = []
    seen: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("marker file is empty", line=1) from None
        if [h.strip() for h in header] != MARKER_HEADER:
            raise DataError(
                f"marker header must be {','.join(MARKER_HEADER)!r}, got {','.join(header)!r}",
                line=1,
            )
        prev_chrom = None
        prev_pos = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"expected 4 columns, got {len(row)}", line=lineno)
            name, chrom, pos_s, weight_s = (c.strip() for c in row)
            if name in seen:
                raise DataError(
                    f"duplicate marker name {name!r} (first seen on line {seen[name]})",
                    line=lineno,
                )
            seen[name] = lineno
            try:
                pos = float(pos_s)
                weight = float(weight_s)
            except ValueError:
                raise DataError(f"non-numeric position or weight in {row!r}", line=lineno) from None
            if not (math.isfinite(pos) and math.isfinite(weight)):
                raise DataError("position and weight must be finite", line=lineno)
            if chrom == prev_chrom and prev_pos is not None and pos < prev_pos:
                raise DataError(
                    f"position {pos} out of order within chromosome {chrom!r}", line=lineno
                )
            prev_chrom, prev_pos = chrom, pos
            names.append(name)
            chroms.append(chrom)
            positions.append(pos)
            weights.append(weight)
    if not names:
        raise DataError("marker file contains no markers", line=2)
    return names, chroms, np.array(positions), np.array(weights)


def _read_genotype_file(path, n_loci: int):
    genomes: list[Genome] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != n_loci:
                raise DataError(
                    f"individual has {len(tokens)} loci, marker file defines {n_loci}",
                    line=lineno,
                )
            alleles = np.empty((n_loci, 2), dtype=np.bool_)
            for j, tok in enumerate(tokens):
                pair = GENOTYPE_TOKENS.get(tok)
                if pair is None:
                    raise DataError(
                        f"invalid diplotype token {tok!r} at locus {j} (expected 00/01/10/11)",
                        line=lineno,
                    )
                alleles[j, 0], alleles[j, 1] = pair
            genomes.append(Genome(alleles))
    if not genomes:
        raise DataError("genotype file contains no individuals", line=1)
    return genomes


def load_dataset(genotype_path, marker_path) -> FounderDataset:
    """Load and validate a founder dataset from its two files."""
    names, chroms, positions, weights = _read_marker_file(marker_path)
    genomes = _read_genotype_file(genotype_path, len(names))
    return FounderDataset(
        genotypes=tuple(genomes),
        model=TraitModel(weights=weights),
        map=map_from_positions(chroms, positions),
        marker_names=tuple(names),
        chromosomes=tuple(chroms),
        positions_cM=positions,
    )


def save_dataset(dataset: FounderDataset, genotype_path, marker_path) -> None:
    """Write a dataset back to the two-file format; loading inverts exactly."""
    with open(marker_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MARKER_HEADER)
        for name, chrom, pos, weight in zip(
            dataset.marker_names,
            dataset.chromosomes,
            dataset.positions_cM,
            dataset.model.weights,
        ):
            writer.writerow([name, chrom, repr(float(pos)), repr(float(weight))])
    with open(genotype_path, "w") as fh:
        for genome in dataset.genotypes:
            tokens = [
                f"{int(genome.alleles[j, 0])}{int(genome.alleles[j, 1])}"
                for j in range(dataset.n_loci)
            ]
            fh.write(" ".join(tokens) + "\n")


def subset_markers(dataset: FounderDataset, m_target: int, rng: RngStream) -> FounderDataset:
    """Keep a uniform random subset of markers, preserving genome order.

    The genetic map is recomputed from the surviving positions, so linkage
    between retained neighbors reflects their true map distance.
    """
    m = dataset.n_loci
    if not (1 <= m_target <= m):
        raise ConfigError(f"cannot subset {m_target} markers out of {m}")
    if m_target == m:
        return dataset
    keep = np.sort(rng.generator().choice(m, size=m_target, replace=False))
    chroms = tuple(dataset.chromosomes[i] for i in keep)
    positions = dataset.positions_cM[keep]
    return FounderDataset(
        genotypes=tuple(Genome(g.alleles[keep]) for g in dataset.genotypes),
        model=TraitModel(
            weights=dataset.model.weights[keep],
            trait_name=dataset.model.trait_name,
            trait_unit=dataset.model.trait_unit,
        ),
        map=map_from_positions(chroms, positions),
        marker_names=tuple(dataset.marker_names[i] for i in keep),
        chromosomes=chroms,
        positions_cM=positions,
    )


def _chromosome_sizes(m: int, n_chromosomes: int) -> list[int]:
    base, extra = divmod(m, n_chromosomes)
    return [base + 1 if c < extra else base for c in range(n_chromosomes)]


def synthesize_founders(
    n_founders: int,
    m: int,
    n_chromosomes: int,
    seed: int,
    allele_freq_spread: float = 1.0,
    effect_scale: float = 1.0,
) -> FounderDataset:
    """Generate a random founder dataset.

    Per-locus allele frequencies are drawn from a symmetric
    Beta(spread, spread); founder alleles are independent Bernoulli draws per
    chromosome copy; marker effects are Gaussian with standard deviation
    ``effect_scale``; marker positions are uniform over 100 cM per
    chromosome, sorted. Equal seeds give bitwise-identical datasets.
    """
    if n_founders < 1 or m < 1 or n_chromosomes < 1:
        raise ConfigError("founder count, marker count, and chromosome count must be positive")
    if n_chromosomes > m:
        raise ConfigError("cannot place more chromosomes than markers")
    stream = RngStream(seed)
    freqs = stream.child(0).generator().beta(allele_freq_spread, allele_freq_spread, size=m)
    alleles = stream.child(1).generator().random((n_founders, m, 2)) < freqs[None, :, None]
    effects = stream.child(2).generator().normal(0.0, effect_scale, size=m)

    sizes = _chromosome_sizes(m, n_chromosomes)
    pos_gen = stream.child(3).generator()
    chroms: list[str] = []
    positions: list[np.ndarray] = []
    for c, size in enumerate(sizes):
        chroms.extend([f"chr{c + 1}"] * size)
        positions.append(np.sort(pos_gen.random(size) * 100.0))
    positions_arr = np.concatenate(positions)

    width = max(6, len(str(m)))
    names = tuple(f"M{i:0{width}d}" for i in range(1, m + 1))
    return FounderDataset(
        genotypes=tuple(Genome(alleles[i]) for i in range(n_founders)),
        model=TraitModel(weights=effects, trait_name="synthetic_trait", trait_unit="au"),
        map=map_from_positions(chroms, positions_arr),
        marker_names=names,
        chromosomes=tuple(chroms),
        positions_cM=positions_arr,
    )


@dataclass(frozen=True)
class GenerationRecord:
    """One logged breeding generation within one episode."""

    seed: int
    generation: int
    best_trait: float
    mean_trait: float
    trait_std: float
    mean_genome_correlation: float

    def row(self) -> list[str]:
        return [
            str(self.seed),
            str(self.generation),
            repr(float(self.best_trait)),
            repr(float(self.mean_trait)),
            repr(float(self.trait_std)),
            repr(float(self.mean_genome_correlation)),
        ]


def write_episode_log(path, records) -> None:
    """Write generation records (one or many episodes) as CSV.

    Floats are serialized with the shortest decimal representation that
    round-trips exactly, so rereading reproduces the logged values bit for
    bit.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_LOG_HEADER)
        for record in records:
            writer.writerow(record.row())


def log_episode(path, records) -> None:
    """Write one episode's per-generation records (generation 0 included)."""
    write_episode_log(path, records)


def read_episode_log(path) -> list[GenerationRecord]:
    """Read back an episode log written by :func:`write_episode_log`."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EPISODE_LOG_HEADER:
            raise DataError(
                f"episode log header must be {','.join(EPISODE_LOG_HEADER)!r}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(EPISODE_LOG_HEADER):
                raise DataError("wrong column count", line=lineno)
            records.append(
                GenerationRecord(
                    seed=int(row[0]),
                    generation=int(row[1]),
                    best_trait=float(row[2]),
                    mean_trait=float(row[3]),
                    trait_std=float(row[4]),
                    mean_genome_correlation=float(row[5]),
                )
            )
    return records


def resolve_data_paths(genotypes, markers, data_dir=None):
    """Resolve dataset file paths, honoring a default data directory.

    Relative paths that do not exist from the working directory are looked
    up under ``data_dir`` (typically the BREEDSIM_DATA_DIR environment
    variable) when provided.
    """
    out = []
    for p in (genotypes, markers):
        path = Path(p)
        if not path.is_absolute() and not path.exists() and data_dir:
            candidate = Path(data_dir) / path
            if candidate.exists():
                path = candidate
        out.append(path)
    return tuple(out)
