"""Command-line entry point.

Subcommands: gen-data (synthetic founder datasets), simulate (policy
episodes + summary statistics), train (PPO), compare (paired-seed policy
comparison report), gradcheck (network gradient verification). Values in a
``--config`` YAML file override command-line flags. The BREEDSIM_DATA_DIR
environment variable provides a default directory for relative dataset
paths. Every run directory receives a manifest.json sufficient to reproduce
the run.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import data_io
from .baselines import make_policy
from .data_io import GenerationRecord, load_dataset, resolve_data_paths
from .envs import ENV_NAMES, make_env
from .errors import BreedsimError, ConfigError
from .genome import genome_correlation
from .rng import RngStream
from .runio import complete_manifest, run_indexed, write_manifest

POLICY_CHOICES = "standard-gs | ohv | random | learned:<checkpoint>"


def _load_config_overrides(args: argparse.Namespace) -> None:
    """Apply values from --config on top of parsed flags (config wins)."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        overrides = yaml.safe_load(fh) or {}
    if not isinstance(overrides, dict):
        raise ConfigError("config file must contain a mapping of option names")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"config key {key!r} is not an option of this command")
        setattr(args, dest, value)


def _dataset_from_args(args) -> data_io.FounderDataset:
    data_dir = os.environ.get("BREEDSIM_DATA_DIR")
    gpath, mpath = resolve_data_paths(args.genotypes, args.markers, data_dir)
    dataset = load_dataset(gpath, mpath)
    subset = int(getattr(args, "subset", 0) or 0)
    if subset:
        dataset = data_io.subset_markers(
            dataset, subset, RngStream(int(args.seed)).child(99)
        )
    return dataset


def _env_kwargs(args) -> dict:
    return dict(
        population_size=int(args.n),
        top_k=int(args.k),
        n_crosses=int(args.crosses),
        horizon=int(args.horizon),
        reward_mode=args.reward_mode,
        aggregation=args.aggregation,
        gamma=float(args.gamma),
    )


def _episode_stats(env, seed: int) -> GenerationRecord:
    traits = env.traits()
    corr = genome_correlation(env.population)
    return GenerationRecord(
        seed=seed,
        generation=env.t,
        best_trait=float(traits.max()),
        mean_trait=float(traits.mean()),
        trait_std=float(traits.std()),
        mean_genome_correlation=float(corr.values.mean()),
    )


def run_policy_episode(task, dataset, env_name, env_kwargs, policy_spec):
    """One full episode; returns its per-generation records.

    ``task`` is (env_seed, policy_seed). A self-contained unit of work so
    episodes can be distributed across worker processes without changing
    results.
    """
    env_seed, policy_seed = task
    env = make_env(env_name, dataset, **env_kwargs)
    policy = make_policy(policy_spec, model=dataset.model, expected_markers=dataset.n_loci)
    gen = RngStream(policy_seed).generator()
    obs = env.reset(env_seed)
    records = [_episode_stats(env, env_seed)]
    while True:
        if env_name == "simplified-breeding-gym":
            action = {"n_select": env_kwargs["top_k"], "n_crosses": env_kwargs["n_crosses"]}
        else:
            action = policy.act(obs, gen)
        result = env.step(action)
        records.append(_episode_stats(env, env_seed))
        if result.terminated:
            return records
        obs = result.observation


def _episode_seeds(base_seed: int, episodes: int) -> list[tuple[int, int]]:
    root = RngStream(int(base_seed))
    return [
        (root.child(0, i).integer(), root.child(1, i).integer())
        for i in range(episodes)
    ]


def _check_env_policy(env_name: str, policy_spec: str) -> None:
    if env_name not in ENV_NAMES:
        raise ConfigError(f"unknown environment {env_name!r}; choose from {sorted(ENV_NAMES)}")
    if env_name == "selection-scores":
        return
    if env_name == "simplified-breeding-gym" and policy_spec == "standard-gs":
        # Its built-in selection is already trait-based; the policy reduces
        # to the constant (keep k, make l crosses) action.
        return
    raise ConfigError(
        f"policy {policy_spec!r} cannot drive environment {env_name!r} from the CLI; "
        "use the library or adapter API for direct control"
    )


# ---------------------------------------------------------------------------
# gen-data
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    started = time.monotonic()
    out = Path(args.out)
    dataset = data_io.synthesize_founders(
        n_founders=int(args.founders),
        m=int(args.markers),
        n_chromosomes=int(args.chromosomes),
        seed=int(args.seed),
        allele_freq_spread=float(args.freq_spread),
        effect_scale=float(args.effect_scale),
    )
    out.mkdir(parents=True, exist_ok=True)
    gpath, mpath = out / "genotypes.txt", out / "markers.csv"
    manifest = write_manifest(
        out,
        "gen-data",
        {
            "founders": int(args.founders),
            "markers": int(args.markers),
            "chromosomes": int(args.chromosomes),
            "freq_spread": float(args.freq_spread),
            "effect_scale": float(args.effect_scale),
        },
        int(args.seed),
        {"genotypes": gpath, "markers": mpath},
    )
    data_io.save_dataset(dataset, gpath, mpath)
    complete_manifest(manifest, started)
    print(f"wrote {dataset.n_founders} founders x {dataset.n_loci} markers to {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _run_episodes(dataset, env_name, env_kwargs, policy_spec, base_seed, episodes, workers):
    tasks = _episode_seeds(base_seed, episodes)
    fn = functools.partial(
        run_policy_episode,
        dataset=dataset,
        env_name=env_name,
        env_kwargs=env_kwargs,
        policy_spec=policy_spec,
    )
    return run_indexed(fn, tasks, workers)


def cmd_simulate(args) -> int:
    started = time.monotonic()
    _check_env_policy(args.env, args.policy)
    dataset = _dataset_from_args(args)
    env_kwargs = _env_kwargs(args)
    # Surface checkpoint/metadata problems before spending episode time.
    make_policy(args.policy, model=dataset.model, expected_markers=dataset.n_loci)

    out = Path(args.out)
    manifest = write_manifest(
        out,
        "simulate",
        {
            "env": args.env,
            "policy": args.policy,
            "episodes": int(args.episodes),
            "workers": int(args.workers),
            "genotypes": str(args.genotypes),
            "markers": str(args.markers),
            "subset": int(args.subset),
            **env_kwargs,
        },
        int(args.seed),
        {"episodes_csv": out / "episodes.csv", "summary": out / "summary.json"},
    )
    episodes = _run_episodes(
        dataset, args.env, env_kwargs, args.policy, int(args.seed),
        int(args.episodes), int(args.workers),
    )
    records = [record for episode in episodes for record in episode]
    data_io.write_episode_log(out / "episodes.csv", records)

    final_best = np.array([episode[-1].best_trait for episode in episodes])
    sem = float(final_best.std(ddof=1) / np.sqrt(len(final_best))) if len(final_best) > 1 else 0.0
    summary = {
        "policy": args.policy,
        "env": args.env,
        "episodes": len(episodes),
        "final_best_mean": float(final_best.mean()),
        "final_best_sem": sem,
        "final_best": [float(x) for x in final_best],
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    complete_manifest(manifest, started)
    print(
        f"{args.policy} on {args.env}: final best trait "
        f"{summary['final_best_mean']:.4f} +/- {sem:.4f} (SEM over {len(episodes)} episodes)"
    )
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def cmd_compare(args) -> int:
    started = time.monotonic()
    from scipy import stats

    if len(args.policies) < 2:
        raise ConfigError("compare needs at least two policy specs")
    for spec in args.policies:
        _check_env_policy(args.env, spec)
    dataset = _dataset_from_args(args)
    env_kwargs = _env_kwargs(args)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "compare",
        {
            "env": args.env,
            "policies": list(args.policies),
            "episodes": int(args.episodes),
            "workers": int(args.workers),
            "genotypes": str(args.genotypes),
            "markers": str(args.markers),
            "subset": int(args.subset),
            **env_kwargs,
        },
        int(args.seed),
        {"report": out / "report.csv", "summary": out / "summary.json"},
    )

    horizon = env_kwargs["horizon"]
    labels = [f"p{i}_{spec.split(':')[0]}" for i, spec in enumerate(args.policies)]
    best = {}  # label -> (episodes, horizon+1) best-trait table
    for spec, label in zip(args.policies, labels):
        episodes = _run_episodes(
            dataset, args.env, env_kwargs, spec, int(args.seed),
            int(args.episodes), int(args.workers),
        )
        best[label] = np.array([[r.best_trait for r in episode] for episode in episodes])

    import csv as _csv

    with open(out / "report.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        header = ["generation"]
        for label in labels:
            header += [f"{label}_mean_best", f"{label}_sem_best"]
        writer.writerow(header)
        n_ep = int(args.episodes)
        for gen in range(horizon + 1):
            row = [str(gen)]
            for label in labels:
                col = best[label][:, gen]
                sem = float(col.std(ddof=1) / np.sqrt(n_ep)) if n_ep > 1 else 0.0
                row += [repr(float(col.mean())), repr(sem)]
            writer.writerow(row)

    reference = best[labels[0]][:, -1]
    summary = {"reference": args.policies[0], "episodes": int(args.episodes), "policies": {}}
    lines = []
    for i, (spec, label) in enumerate(zip(args.policies, labels)):
        final = best[label][:, -1]
        entry = {
            "spec": spec,
            "final_best_mean": float(final.mean()),
            "final_best_sem": float(final.std(ddof=1) / np.sqrt(len(final)))
            if len(final) > 1
            else 0.0,
        }
        if i > 0:
            diff = final - reference
            entry["pct_diff_vs_first"] = (
                float(100.0 * diff.mean() / abs(reference.mean()))
                if reference.mean() != 0
                else float("nan")
            )
            if np.allclose(diff, 0.0):
                entry["p_policy_greater"] = 1.0
                entry["p_first_greater"] = 1.0
            else:
                entry["p_policy_greater"] = float(
                    stats.ttest_rel(final, reference, alternative="greater").pvalue
                )
                entry["p_first_greater"] = float(
                    stats.ttest_rel(reference, final, alternative="greater").pvalue
                )
        else:
            entry["pct_diff_vs_first"] = 0.0
        summary["policies"][label] = entry
        lines.append(
            f"{spec}: final best {entry['final_best_mean']:.4f} "
            f"({entry['pct_diff_vs_first']:+.2f}% vs {args.policies[0]})"
        )
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    complete_manifest(manifest, started)
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _parse_curriculum(text: str):
    try:
        stages = []
        for part in text.split(","):
            frac, horizon = part.split(":")
            stages.append((float(frac), int(horizon)))
        return tuple(stages)
    except ValueError:
        raise ConfigError(
            f"curriculum must look like '0:3,0.25:5,0.5:7,0.75:10', got {text!r}"
        ) from None


def cmd_train(args) -> int:
    started = time.monotonic()
    from .trainer import TrainConfig, train

    dataset = _dataset_from_args(args)
    config = TrainConfig(
        total_steps=int(args.total_steps),
        num_envs=int(args.num_envs),
        rollout_length=int(args.rollout_length),
        minibatch_size=int(args.minibatch_size),
        epochs_per_update=int(args.epochs),
        clip_ratio=float(args.clip_ratio),
        gamma=float(args.gamma),
        gae_lambda=float(args.gae_lambda),
        learning_rate=float(args.lr),
        value_coef=float(args.value_coef),
        entropy_coef=float(args.entropy_coef),
        max_grad_norm=float(args.max_grad_norm),
        curriculum=_parse_curriculum(args.curriculum)
        if isinstance(args.curriculum, str)
        else tuple(tuple(x) for x in args.curriculum),
        master_seed=int(args.seed),
        population_size=int(args.n),
        top_k=int(args.k),
        n_crosses=int(args.crosses),
        reward_mode=args.reward_mode,
        aggregation=args.aggregation,
        eval_every=int(args.eval_every),
        eval_episodes=int(args.eval_episodes),
        checkpoint_every=int(args.checkpoint_every),
    )
    out = Path(args.out)
    from dataclasses import asdict

    manifest = write_manifest(
        out,
        "train",
        {
            **{k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
            "genotypes": str(args.genotypes),
            "markers": str(args.markers),
            "subset": int(args.subset),
            "resume": str(args.resume) if args.resume else None,
        },
        config.master_seed,
        {"metrics": out / "metrics.csv", "checkpoint": out / "checkpoint_final"},
    )
    summary = train(dataset, config, out, resume_from=args.resume, workers=int(args.workers))
    complete_manifest(manifest, started)
    if summary["final_eval_mean"] is not None:
        print(
            f"trained {summary['steps']} steps ({summary['updates']} updates); "
            f"mean eval return {summary['final_eval_mean']:.4f}; "
            f"checkpoint at {summary['checkpoint']}"
        )
    else:
        print(f"trained {summary['steps']} steps; checkpoint at {summary['checkpoint']}")
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    from .policy_net import NetConfig, gradient_check, init_params

    config = NetConfig(markers=int(args.markers))
    stream = RngStream(int(args.seed))
    params = init_params(config, stream.child(0))
    gen = stream.child(1).generator()
    obs = gen.standard_normal((int(args.plants), config.markers, 2))
    error = gradient_check(
        params, obs, gen_fraction=float(args.gen_fraction), eps=float(args.eps),
        seed=int(args.seed),
    )
    print(
        f"gradient check over {params.n_parameters()} parameters "
        f"(m={config.markers}, plants={args.plants}, eps={args.eps}): "
        f"max relative error {error:.3e}"
    )
    if error >= float(args.tol):
        print(f"FAIL: exceeds tolerance {args.tol}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--genotypes", required=True, help="founder genotype file")
    p.add_argument("--markers", required=True, help="marker CSV file")
    p.add_argument("--subset", type=int, default=0,
                   help="randomly keep this many markers (0 = all)")
    p.add_argument("--n", type=int, default=200, help="population size")
    p.add_argument("--k", type=int, default=20, help="plants selected per generation")
    p.add_argument("--crosses", type=int, default=10, help="random crosses per generation")
    p.add_argument("--horizon", type=int, default=10, help="generations per episode")
    p.add_argument("--reward-mode", choices=["terminal", "per_step"], default="terminal")
    p.add_argument("--aggregation", choices=["max", "mean"], default="max")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes for independent episodes (never affects results)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="YAML file whose values override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breedsim",
        description="Seeded breeding-program simulator, RL environments, and PPO trainer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic founder dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--founders", type=int, default=400)
    p.add_argument("--markers", type=int, default=1000)
    p.add_argument("--chromosomes", type=int, default=10)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--freq-spread", type=float, default=1.0,
                   help="Beta(spread, spread) allele-frequency concentration")
    p.add_argument("--effect-scale", type=float, default=1.0,
                   help="stddev of marker effects")
    p.add_argument("--config", help="YAML file whose values override flags")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("simulate", help="run policy episodes and summarize genetic gain")
    _add_common_env_flags(p)
    p.add_argument("--env", default="selection-scores", help=f"one of {sorted(ENV_NAMES)}")
    p.add_argument("--policy", default="standard-gs", help=POLICY_CHOICES)
    p.add_argument("--episodes", type=int, default=100)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="paired-seed comparison of two or more policies")
    _add_common_env_flags(p)
    p.add_argument("--env", default="selection-scores")
    p.add_argument("--policies", nargs="+", required=True, help=POLICY_CHOICES)
    p.add_argument("--episodes", type=int, default=100)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("train", help="train the scoring policy with PPO")
    _add_common_env_flags(p)
    p.add_argument("--resume", help="checkpoint directory to resume from")
    p.add_argument("--total-steps", type=int, default=100_000)
    p.add_argument("--num-envs", type=int, default=8)
    p.add_argument("--rollout-length", type=int, default=2048)
    p.add_argument("--minibatch-size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--clip-ratio", type=float, default=0.2)
    p.add_argument("--gae-lambda", type=float, default=0.95)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--value-coef", type=float, default=0.5)
    p.add_argument("--entropy-coef", type=float, default=0.0)
    p.add_argument("--max-grad-norm", type=float, default=0.5)
    p.add_argument("--curriculum", default="0:3,0.25:5,0.5:7,0.75:10")
    p.add_argument("--eval-every", type=int, default=5)
    p.add_argument("--eval-episodes", type=int, default=20)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--markers", type=int, default=120)
    p.add_argument("--plants", type=int, default=3)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--gen-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--config", help="YAML file whose values override flags")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _load_config_overrides(args)
        return args.func(args)
    except (BreedsimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
