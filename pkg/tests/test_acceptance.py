"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The statistical criteria use fixed seeds, so every run is
deterministic.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from breedsim.baselines import random_scores, standard_gs_scores
from breedsim.cli import main
from breedsim.data_io import synthesize_founders
from breedsim.envs import SelectionScores
from breedsim.genome import (
    Genome,
    Population,
    RecombinationMap,
    TraitModel,
    estimate_trait,
    optimal_haploid_value,
    weighted_observation,
    observation_trait_sums,
)
from breedsim.meiosis import CrossPlan, cross_batch
from breedsim.policy_net import (
    NetConfig,
    gradient_check,
    init_params,
    score_and_value,
)
from breedsim.rng import RngStream
from breedsim.trainer import (
    TrainConfig,
    compute_gae,
    eval_seeds,
    evaluate_params,
    train,
)


def report(name: str, detail: str) -> None:
    print(f"ACCEPTANCE {name}: PASS ({detail})")


# ---------------------------------------------------------------------------
# 1. Genetics statistics
# ---------------------------------------------------------------------------


def test_genetics_statistics():
    started = time.monotonic()
    switch = np.array([0.0, 0.10, 0.25, 0.40, 0.5, 0.05])
    rmap = RecombinationMap(switch_prob=switch, chromosome_starts=(0, 4))

    # A fully heterozygous parent whose copy-0 alleles are all ones, so a
    # gamete's allele at each locus reveals the copying phase directly.
    parent = Genome(np.stack([np.ones(6, bool), np.zeros(6, bool)], axis=1))
    pop = Population(members=(parent,))
    n_gametes = 120_000
    plan = CrossPlan(tuple((0, 0) for _ in range(n_gametes // 2)))
    offspring = cross_batch(pop, plan, rmap, RngStream(20240))
    stacked = offspring.genotypes
    gametes = np.concatenate([stacked[:, :, 0], stacked[:, :, 1]], axis=0)
    phase = 1 - gametes.astype(np.int64)  # allele 1 -> phase 0

    # Mendelian segregation: every heterozygous locus transmits 0.5/0.5.
    sigma_mendel = math.sqrt(0.25 / n_gametes)
    worst_allele = float(np.abs(gametes.mean(axis=0) - 0.5).max())
    assert worst_allele < 3 * sigma_mendel

    # Per-interval recombination frequency matches the map (a fresh phase at
    # the chromosome boundary looks like a 0.5 switch).
    worst_interval = 0.0
    for i in range(1, 6):
        observed = float((phase[:, i] != phase[:, i - 1]).mean())
        expected = switch[i]
        sigma = math.sqrt(max(expected * (1 - expected), 0.25 / 4) / n_gametes)
        assert abs(observed - expected) < 3 * sigma, f"interval {i}"
        worst_interval = max(worst_interval, abs(observed - expected) / sigma)

    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    report(
        "genetics-statistics",
        f"{n_gametes} gametes, max allele dev {worst_allele:.2e}, "
        f"worst interval {worst_interval:.2f} sigma, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. Trait oracle
# ---------------------------------------------------------------------------


def test_trait_oracle_exactness():
    started = time.monotonic()
    gen = np.random.default_rng(91)
    m = 300
    weights = gen.normal(size=m) * 10.0 ** gen.integers(-2, 3, size=m).astype(float)
    model = TraitModel(weights=weights)

    genomes = [Genome(gen.random((m, 2)) < gen.random()) for _ in range(1000)]
    pop = Population(members=tuple(genomes))
    obs = weighted_observation(pop, model)
    row_sums = observation_trait_sums(obs)

    for i, g in enumerate(genomes):
        trait_loop = 0.0
        ohv_loop = 0.0
        for j in range(m):
            a0 = float(g.alleles[j, 0])
            a1 = float(g.alleles[j, 1])
            trait_loop += weights[j] * (a0 + a1)
            ohv_loop += max(weights[j] * a0, weights[j] * a1)
        ohv_loop *= 2.0
        assert estimate_trait(g, model) == trait_loop
        assert optimal_haploid_value(g, model) == ohv_loop
        assert row_sums[i] == trait_loop

    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    report("trait-oracle", f"1000 genomes x {m} loci, exact match, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. Shape reproduction
# ---------------------------------------------------------------------------


def test_shape_reproduction():
    config = NetConfig(markers=1000)
    assert config.conv1_out_len == 122
    assert config.conv2_out_len == 58
    assert config.flat_dim == 928
    report("shape-reproduction", "1000 -> 122 -> 58 -> flattened 928")


# ---------------------------------------------------------------------------
# 4. Invariance suite
# ---------------------------------------------------------------------------


def test_invariance_suite():
    started = time.monotonic()
    params = init_params(NetConfig(markers=1000), RngStream(7).child(0))
    gen = np.random.default_rng(7)
    worst_swap = 0.0
    for trial in range(100):
        obs = gen.standard_normal((4, 1000, 2))
        frac = float(gen.random())
        scores, value = score_and_value(obs, frac, params)

        perm = gen.permutation(4)
        p_scores, p_value = score_and_value(obs[perm], frac, params)
        assert np.array_equal(p_scores, scores[perm]), f"trial {trial}"
        assert p_value == value

        s_scores, s_value = score_and_value(obs[:, :, ::-1], frac, params)
        worst_swap = max(
            worst_swap, float(np.abs(s_scores - scores).max()), abs(s_value - value)
        )
    assert worst_swap <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    report(
        "invariance-suite",
        f"100 inputs, permutation exact, channel swap <= {worst_swap:.1e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 5. Gradient check
# ---------------------------------------------------------------------------


def test_gradient_check_all_parameters():
    started = time.monotonic()
    params = init_params(NetConfig(markers=120), RngStream(3).child(0))
    obs = np.random.default_rng(3).standard_normal((2, 120, 2))
    error = gradient_check(params, obs, gen_fraction=0.5, eps=1e-5, seed=3)
    elapsed = time.monotonic() - started
    assert error < 1e-4
    assert elapsed < 120.0
    report(
        "gradient-check",
        f"{params.n_parameters()} parameters, max rel error {error:.2e}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 6. GAE closed forms
# ---------------------------------------------------------------------------


def test_gae_closed_forms():
    gen = np.random.default_rng(11)
    rewards = gen.normal(size=(12, 4))
    values = gen.normal(size=(12, 4))
    dones = gen.random((12, 4)) < 0.25
    bootstrap = gen.normal(size=4)

    adv0, ret0 = compute_gae(rewards, values, dones, bootstrap, gamma=0.93, lam=0.0)
    for t in range(12):
        next_v = bootstrap if t == 11 else values[t + 1]
        expected = rewards[t] + 0.93 * next_v * (1.0 - dones[t]) - values[t]
        assert np.array_equal(adv0[t], expected)
    assert np.array_equal(ret0, adv0 + values)

    dones_full = np.zeros((12, 4), dtype=bool)
    dones_full[-1] = True
    adv1, _ = compute_gae(rewards, values, dones_full, bootstrap, gamma=1.0, lam=1.0)
    future = np.cumsum(rewards[::-1], axis=0)[::-1]
    assert np.allclose(adv1, future - values, atol=1e-12)
    report("gae-closed-forms", "lambda=0 and lambda=1, gamma=1 match analytic forms")


# ---------------------------------------------------------------------------
# 7. Selection-gain reproduction
# ---------------------------------------------------------------------------


def run_scored_episode(env, seed, policy):
    """Returns (per-generation best traits, initial trait std)."""
    obs = env.reset(seed)
    policy_gen = RngStream(seed).child(555).generator()
    traits = env.traits()
    best = [float(traits.max())]
    initial_std = float(traits.std())
    while True:
        if policy == "standard-gs":
            action = standard_gs_scores(obs)
        else:
            action = random_scores(env.population_size, policy_gen)
        result = env.step(action)
        best.append(result.info["best_trait"])
        if result.terminated:
            return np.array(best), initial_std
        obs = result.observation


def test_selection_gain_reproduction():
    started = time.monotonic()
    dataset = synthesize_founders(400, 1000, 10, seed=2024)
    env = SelectionScores(
        dataset, population_size=200, top_k=20, n_crosses=10, horizon=10
    )
    n_seeds = 100
    gs_best = np.empty((n_seeds, 11))
    rand_final = np.empty(n_seeds)
    initial_stds = np.empty(n_seeds)
    for i in range(n_seeds):
        best, std0 = run_scored_episode(env, seed=i, policy="standard-gs")
        gs_best[i] = best
        initial_stds[i] = std0
        rand_best, _ = run_scored_episode(env, seed=i, policy="random")
        rand_final[i] = rand_best[-1]

    gain = gs_best[:, -1].mean() - gs_best[:, 0].mean()
    threshold = 3.0 * initial_stds.mean()
    assert gain >= threshold, f"gain {gain:.2f} < 3 initial stds {threshold:.2f}"

    test = stats.ttest_rel(gs_best[:, -1], rand_final, alternative="greater")
    assert test.pvalue < 0.01

    # Qualitative analog of the rising selection curve: monotone mean best.
    means = gs_best.mean(axis=0)
    assert (np.diff(means) > 0).all()

    elapsed = time.monotonic() - started
    assert elapsed < 600.0
    report(
        "selection-gain",
        f"gain {gain:.1f} >= {threshold:.1f} (3 initial stds); "
        f"vs random p={test.pvalue:.1e}; {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 8. Desk-scale learning
# ---------------------------------------------------------------------------


def test_desk_scale_learning(tmp_path):
    started = time.monotonic()
    dataset = synthesize_founders(50, 100, 4, seed=3)
    config = TrainConfig(
        total_steps=60_000,
        num_envs=8,
        rollout_length=128,
        minibatch_size=128,
        epochs_per_update=4,
        clip_ratio=0.2,
        gamma=1.0,
        gae_lambda=0.95,
        learning_rate=1e-3,
        value_coef=0.5,
        entropy_coef=0.0,
        max_grad_norm=0.5,
        curriculum=((0.0, 3),),
        master_seed=0,
        population_size=20,
        top_k=5,
        n_crosses=5,
        eval_every=0,
        eval_episodes=20,
    )
    assert config.total_steps <= 500_000

    seeds = eval_seeds(config)
    initial_params = init_params(
        NetConfig(markers=dataset.n_loci), RngStream(config.master_seed).child(0)
    )
    initial_returns = evaluate_params(initial_params, dataset, config, 3, seeds)

    summary = train(dataset, config, tmp_path / "desk_run")
    final_returns = np.array(summary["final_eval_returns"])

    test = stats.ttest_rel(final_returns, initial_returns, alternative="greater")
    assert test.pvalue < 0.05, (
        f"no significant improvement: {final_returns.mean():.2f} vs "
        f"{initial_returns.mean():.2f}, p={test.pvalue:.3f}"
    )

    # Random-selection baseline on the same evaluation seeds.
    env = SelectionScores(dataset, population_size=20, top_k=5, n_crosses=5, horizon=3)
    rand_returns = np.array(
        [run_scored_episode(env, s, policy="random")[0][-1] for s in seeds]
    )
    assert final_returns.mean() >= rand_returns.mean()

    elapsed = time.monotonic() - started
    assert elapsed < 1800.0
    report(
        "desk-scale-learning",
        f"eval {initial_returns.mean():.2f} -> {final_returns.mean():.2f} "
        f"(p={test.pvalue:.1e}), random baseline {rand_returns.mean():.2f}, "
        f"{config.total_steps} steps, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 9. Determinism
# ---------------------------------------------------------------------------


def test_determinism_simulate_and_train(tmp_path):
    data_dir = tmp_path / "data"
    assert main(
        [
            "gen-data", "--out", str(data_dir), "--founders", "30", "--markers", "96",
            "--chromosomes", "2", "--seed", "17",
        ]
    ) == 0

    def simulate(out, workers):
        code = main(
            [
                "simulate",
                "--genotypes", str(data_dir / "genotypes.txt"),
                "--markers", str(data_dir / "markers.csv"),
                "--out", str(out),
                "--n", "12", "--k", "4", "--crosses", "2", "--horizon", "4",
                "--episodes", "8", "--seed", "5", "--workers", str(workers),
            ]
        )
        assert code == 0
        return (out / "episodes.csv").read_bytes()

    first = simulate(tmp_path / "s1", workers=1)
    repeat = simulate(tmp_path / "s2", workers=1)
    pooled = simulate(tmp_path / "s3", workers=3)
    assert first == repeat == pooled

    def train_run(out, workers):
        code = main(
            [
                "train",
                "--genotypes", str(data_dir / "genotypes.txt"),
                "--markers", str(data_dir / "markers.csv"),
                "--out", str(out),
                "--total-steps", "64", "--num-envs", "2", "--rollout-length", "8",
                "--minibatch-size", "8", "--epochs", "2", "--curriculum", "0:2",
                "--n", "6", "--k", "3", "--crosses", "2",
                "--eval-every", "1", "--eval-episodes", "3", "--seed", "9",
                "--workers", str(workers),
            ]
        )
        assert code == 0
        return (out / "metrics.csv").read_bytes()

    t_first = train_run(tmp_path / "t1", workers=1)
    t_repeat = train_run(tmp_path / "t2", workers=1)
    t_pooled = train_run(tmp_path / "t3", workers=2)
    assert t_first == t_repeat == t_pooled
    report(
        "determinism",
        "simulate and train CSVs bitwise across repeats and worker counts",
    )
