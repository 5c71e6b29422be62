import math

import numpy as np
import pytest

from breedsim.data_io import (
    EPISODE_LOG_HEADER,
    GenerationRecord,
    haldane_switch_prob,
    load_dataset,
    log_episode,
    map_from_positions,
    read_episode_log,
    save_dataset,
    subset_markers,
    synthesize_founders,
    write_episode_log,
)
from breedsim.errors import ConfigError, DataError
from breedsim.rng import RngStream


@pytest.fixture()
def small_dataset():
    return synthesize_founders(n_founders=12, m=30, n_chromosomes=3, seed=5)


def test_haldane_examples():
    assert haldane_switch_prob(0.0) == 0.0
    expected = 0.5 * (1.0 - math.exp(-0.2))
    assert haldane_switch_prob(10.0) == pytest.approx(expected, abs=1e-15)
    assert haldane_switch_prob(10.0) == pytest.approx(0.0906, abs=5e-4)


def test_haldane_probabilities_below_half():
    gen = np.random.default_rng(0)
    distances = gen.random(1000) * 1e4
    probs = np.array([haldane_switch_prob(d) for d in distances])
    assert ((probs >= 0.0) & (probs < 0.5)).all()


def test_map_from_positions_boundaries():
    rmap = map_from_positions(["c1", "c1", "c2", "c2"], [0.0, 0.0, 5.0, 5.0])
    assert rmap.switch_prob[0] == 0.0
    assert rmap.switch_prob[1] == 0.0  # 0 cM apart
    assert rmap.switch_prob[2] == 0.5  # chromosome boundary
    assert rmap.switch_prob[3] == 0.0
    assert rmap.chromosome_starts == (0, 2)


def test_save_load_round_trip(tmp_path, small_dataset):
    gpath, mpath = tmp_path / "geno.txt", tmp_path / "markers.csv"
    save_dataset(small_dataset, gpath, mpath)
    loaded = load_dataset(gpath, mpath)
    assert loaded.marker_names == small_dataset.marker_names
    assert loaded.chromosomes == small_dataset.chromosomes
    assert np.array_equal(loaded.positions_cM, small_dataset.positions_cM)
    assert np.array_equal(loaded.model.weights, small_dataset.model.weights)
    assert np.array_equal(loaded.map.switch_prob, small_dataset.map.switch_prob)
    assert loaded.map.chromosome_starts == small_dataset.map.chromosome_starts
    for a, b in zip(loaded.genotypes, small_dataset.genotypes):
        assert np.array_equal(a.alleles, b.alleles)

    # Second round trip is byte-identical.
    g2, m2 = tmp_path / "geno2.txt", tmp_path / "markers2.csv"
    save_dataset(loaded, g2, m2)
    assert g2.read_bytes() == gpath.read_bytes()
    assert m2.read_bytes() == mpath.read_bytes()


def write_marker_file(path, rows, header="name,chrom,pos_cM,weight"):
    path.write_text("\n".join([header] + rows) + "\n")


def test_parse_errors_carry_line_numbers(tmp_path):
    mpath = tmp_path / "markers.csv"
    gpath = tmp_path / "geno.txt"

    write_marker_file(mpath, ["a,c1,0.0,1.0", "a,c1,1.0,1.0"])
    gpath.write_text("00 01\n")
    with pytest.raises(DataError, match="line 3.*duplicate"):
        load_dataset(gpath, mpath)

    write_marker_file(mpath, ["a,c1,5.0,1.0", "b,c1,1.0,1.0"])
    with pytest.raises(DataError, match="line 3.*out of order"):
        load_dataset(gpath, mpath)

    write_marker_file(mpath, ["a,c1,0.0,1.0", "b,c1,1.0,1.0"])
    gpath.write_text("00 01\n00 02\n")
    with pytest.raises(DataError, match="line 2.*invalid diplotype"):
        load_dataset(gpath, mpath)

    gpath.write_text("00 01 11\n")
    with pytest.raises(DataError, match="line 1.*2"):
        load_dataset(gpath, mpath)

    write_marker_file(mpath, ["a,c1,0.0,1.0"], header="name,chrom,weight")
    with pytest.raises(DataError, match="line 1.*header"):
        load_dataset(gpath, mpath)


def test_subset_markers_full_size_is_identity(small_dataset):
    assert subset_markers(small_dataset, 30, RngStream(0)) is small_dataset


def test_subset_markers_reproducible_and_ordered(small_dataset):
    a = subset_markers(small_dataset, 10, RngStream(3))
    b = subset_markers(small_dataset, 10, RngStream(3))
    assert a.marker_names == b.marker_names
    assert np.array_equal(a.model.weights, b.model.weights)

    # Surviving markers keep genome order: positions sorted per chromosome.
    for _ in range(20):
        sub = subset_markers(small_dataset, 9, RngStream(int(_)))
        chroms = np.array(sub.chromosomes)
        for c in np.unique(chroms):
            pos = sub.positions_cM[chroms == c]
            assert (np.diff(pos) >= 0).all()
        # Map recomputed: boundary probabilities are 0.5 exactly.
        starts = sub.map.chromosome_starts
        for s in starts[1:]:
            assert sub.map.switch_prob[s] == 0.5


def test_subset_markers_bounds(small_dataset):
    with pytest.raises(ConfigError):
        subset_markers(small_dataset, 31, RngStream(0))
    with pytest.raises(ConfigError):
        subset_markers(small_dataset, 0, RngStream(0))


def test_subset_map_matches_surviving_distances(small_dataset):
    sub = subset_markers(small_dataset, 12, RngStream(9))
    for i in range(1, 12):
        if sub.chromosomes[i] == sub.chromosomes[i - 1]:
            d = sub.positions_cM[i] - sub.positions_cM[i - 1]
            assert sub.map.switch_prob[i] == pytest.approx(haldane_switch_prob(d), abs=1e-15)


def test_synthesize_founders_seed_determinism():
    a = synthesize_founders(8, 20, 2, seed=11)
    b = synthesize_founders(8, 20, 2, seed=11)
    c = synthesize_founders(8, 20, 2, seed=12)
    assert np.array_equal(a.model.weights, b.model.weights)
    assert all(np.array_equal(x.alleles, y.alleles) for x, y in zip(a.genotypes, b.genotypes))
    assert np.array_equal(a.positions_cM, b.positions_cM)
    assert not np.array_equal(a.model.weights, c.model.weights)


def test_synthesize_founders_concentrated_frequencies():
    ds = synthesize_founders(20, 10_000, 5, seed=2, allele_freq_spread=1e6)
    alleles = np.stack([g.alleles for g in ds.genotypes])
    assert abs(alleles.mean() - 0.5) < 0.01


def test_synthesize_founders_zero_effects():
    from breedsim.genome import population_traits, Population

    ds = synthesize_founders(6, 15, 2, seed=3, effect_scale=0.0)
    pop = Population(members=ds.genotypes)
    assert not population_traits(pop, ds.model).any()


def test_synthesize_founders_validation():
    with pytest.raises(ConfigError):
        synthesize_founders(0, 10, 1, seed=0)
    with pytest.raises(ConfigError):
        synthesize_founders(5, 10, 11, seed=0)


def test_episode_log_round_trip(tmp_path):
    gen = np.random.default_rng(31)
    records = [
        GenerationRecord(
            seed=7,
            generation=t,
            best_trait=float(gen.normal() * 1e3),
            mean_trait=float(gen.normal()),
            trait_std=float(abs(gen.normal()) * 1e-3),
            mean_genome_correlation=float(gen.uniform(-1, 1)),
        )
        for t in range(11)
    ]
    path = tmp_path / "episode.csv"
    log_episode(path, records)

    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(EPISODE_LOG_HEADER)
    assert len(lines) == 12  # header + generations 0..10

    back = read_episode_log(path)
    assert back == records  # float fields reproduce exactly


def test_write_episode_log_multiple_episodes(tmp_path):
    records = [
        GenerationRecord(seed=s, generation=t, best_trait=1.0, mean_trait=0.5,
                         trait_std=0.1, mean_genome_correlation=0.9)
        for s in (1, 2)
        for t in range(3)
    ]
    path = tmp_path / "episodes.csv"
    write_episode_log(path, records)
    back = read_episode_log(path)
    assert [r.seed for r in back] == [1, 1, 1, 2, 2, 2]
