"""PPO with generalized advantage estimation and a horizon curriculum.

Trains the scoring network on a set of score-per-plant environments stepped
in lockstep. Training follows the usual on-policy loop: collect a fixed-size
rollout from every environment, compute GAE advantages, then run several
epochs of clipped-surrogate minibatch updates with Adam. Episode horizons
follow a curriculum: short programs early in training, stretching to the
target length as training progresses (environments are rebuilt at each
breakpoint).

Every random draw derives from the master seed through labeled streams
(environment episodes, exploration noise, minibatch shuffling, evaluation),
so a run is bitwise reproducible, and a run resumed from a checkpoint
continues exactly as the uninterrupted run would have.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .data_io import FounderDataset
from .envs import SelectionScores
from .errors import ConfigError, NumericsError
from .policy_net import (
    NetConfig,
    PolicyParams,
    _backward_plants,
    _forward_plants,
    batch_score_value,
    gaussian_entropy,
    init_params,
    load_checkpoint,
    plant_value_mean,
    save_checkpoint,
    score_and_value,
)
from .rng import RngStream

# Stream domains under the master seed.
_INIT, _EPISODES, _NOISE, _SHUFFLE, _EVAL = 0, 1, 2, 3, 4

METRICS_HEADER = [
    "step",
    "mean_eval_return",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "horizon",
]


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    total_steps: int
    num_envs: int = 8
    rollout_length: int = 2048
    minibatch_size: int = 256
    epochs_per_update: int = 10
    clip_ratio: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 3e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    curriculum: tuple = ((0.0, 3), (0.25, 5), (0.5, 7), (0.75, 10))
    master_seed: int = 0
    population_size: int = 200
    top_k: int = 20
    n_crosses: int = 10
    reward_mode: str = "terminal"
    aggregation: str = "max"
    eval_every: int = 5
    eval_episodes: int = 20
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError("total_steps must be positive")
        if not (0.0 < self.clip_ratio < 1.0):
            raise ConfigError("clip_ratio must lie in (0, 1)")
        if not (0.0 < self.gamma <= 1.0) or not (0.0 < self.gae_lambda <= 1.0):
            raise ConfigError("gamma and gae_lambda must lie in (0, 1]")
        schedule = tuple((float(f), int(h)) for f, h in self.curriculum)
        if not schedule:
            raise ConfigError("curriculum must contain at least one (progress, horizon) entry")
        fracs = [f for f, _ in schedule]
        horizons = [h for _, h in schedule]
        if fracs[0] != 0.0 or fracs != sorted(fracs) or len(set(fracs)) != len(fracs):
            raise ConfigError("curriculum fractions must start at 0 and increase")
        if any(f < 0.0 or f >= 1.0 for f in fracs):
            raise ConfigError("curriculum fractions must lie in [0, 1)")
        if horizons != sorted(horizons):
            raise ConfigError("curriculum horizons must be non-decreasing")
        self.curriculum = schedule

    @property
    def final_horizon(self) -> int:
        return self.curriculum[-1][1]

    def horizon_at(self, progress: float) -> int:
        horizon = self.curriculum[0][1]
        for frac, h in self.curriculum:
            if progress >= frac:
                horizon = h
        return horizon


def load_train_config(path) -> TrainConfig:
    """Read a TrainConfig from a YAML file."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("training config must be a mapping")
    if "curriculum" in raw:
        raw["curriculum"] = tuple((float(f), int(h)) for f, h in raw["curriculum"])
    try:
        return TrainConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"invalid training config: {exc}") from None


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adam with bias correction, operating on a named-tensor dict."""

    def __init__(self, tensors, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def step(self, tensors, grads):
        self.step_count += 1
        t = self.step_count
        for name in sorted(tensors):
            g = np.asarray(grads[name])
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / (1.0 - self.beta1**t)
            v_hat = self.v[name] / (1.0 - self.beta2**t)
            tensors[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self) -> dict:
        out = {"adam_step_count": np.asarray(self.step_count)}
        for name in self.m:
            out[f"adam_m_{name}"] = self.m[name]
            out[f"adam_v_{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays) -> None:
        self.step_count = int(arrays["adam_step_count"])
        for name in self.m:
            self.m[name] = np.asarray(arrays[f"adam_m_{name}"], dtype=np.float64)
            self.v[name] = np.asarray(arrays[f"adam_v_{name}"], dtype=np.float64)


def clip_grad_norm(grads, max_norm: float) -> float:
    """Scale gradients in place to a global L2 norm cap; returns the raw norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g) ** 2))
    norm = math.sqrt(total)
    if max_norm > 0.0 and norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = np.asarray(grads[name]) * scale
    return norm


# ---------------------------------------------------------------------------
# Rollouts and advantages
# ---------------------------------------------------------------------------


class RolloutBuffer:
    """Fixed-size on-policy transition storage for a set of environments.

    Observations are stored as raw boolean genotypes plus the completion
    fraction; the effect-weighted tensor the network consumes is recomputed
    exactly (elementwise product) at update time, which keeps the buffer
    small.
    """

    def __init__(self, steps: int, num_envs: int, n_plants: int, n_markers: int):
        self.steps = steps
        self.num_envs = num_envs
        shape = (steps, num_envs)
        self.alleles = np.zeros(shape + (n_plants, n_markers, 2), dtype=np.bool_)
        self.progress = np.zeros(shape)
        self.actions = np.zeros(shape + (n_plants,))
        self.log_probs = np.zeros(shape)
        self.rewards = np.zeros(shape)
        self.values = np.zeros(shape)
        self.dones = np.zeros(shape, dtype=np.bool_)
        self.advantages = np.zeros(shape)
        self.returns = np.zeros(shape)

    @property
    def size(self) -> int:
        return self.steps * self.num_envs

    def finish(self, bootstrap_values: np.ndarray, gamma: float, lam: float) -> None:
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, bootstrap_values, gamma, lam
        )
        if not np.isfinite(self.advantages).all():
            raise NumericsError("non-finite advantages in rollout buffer")


def compute_gae(rewards, values, dones, bootstrap_values, gamma, lam):
    """Generalized advantage estimation over a (steps, envs) rollout.

    ``bootstrap_values`` are V(s) for the states reached after the last
    recorded step; episode ends mask the bootstrap. Returns are advantages
    plus values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    not_done = 1.0 - np.asarray(dones, dtype=np.float64)
    steps = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    carry = np.zeros(rewards.shape[1])
    for t in range(steps - 1, -1, -1):
        next_values = bootstrap_values if t == steps - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_values * not_done[t] - values[t]
        carry = delta + gamma * lam * not_done[t] * carry
        advantages[t] = carry
    return advantages, advantages + values


class EnvSet:
    """Score-per-plant environments stepped in lockstep, with derived seeds."""

    def __init__(self, dataset: FounderDataset, config: TrainConfig, horizon: int):
        self.config = config
        self.horizon = horizon
        self.envs = [
            SelectionScores(
                dataset,
                population_size=config.population_size,
                top_k=config.top_k,
                n_crosses=config.n_crosses,
                horizon=horizon,
                reward_mode=config.reward_mode,
                aggregation=config.aggregation,
            )
            for _ in range(config.num_envs)
        ]
        self.episode_counters = np.zeros(config.num_envs, dtype=np.int64)
        n, m = config.population_size, dataset.n_loci
        self.cur_alleles = np.zeros((config.num_envs, n, m, 2), dtype=np.bool_)
        self.cur_progress = np.zeros(config.num_envs)

    def _episode_seed(self, master: RngStream, env_idx: int) -> int:
        k = int(self.episode_counters[env_idx])
        self.episode_counters[env_idx] += 1
        return master.child(_EPISODES, env_idx, k).integer()

    def _sync(self, env_idx: int) -> None:
        env = self.envs[env_idx]
        self.cur_alleles[env_idx] = env.population.genotypes
        self.cur_progress[env_idx] = env.t / env.horizon

    def reset_all(self, master: RngStream) -> None:
        for e, env in enumerate(self.envs):
            env.reset(self._episode_seed(master, e))
            self._sync(e)

    def step(self, env_idx: int, action: np.ndarray, master: RngStream):
        """Step one environment; auto-reset on termination. Returns (reward, done)."""
        env = self.envs[env_idx]
        result = env.step(action)
        if result.terminated:
            env.reset(self._episode_seed(master, env_idx))
        self._sync(env_idx)
        return result.reward, result.terminated


def collect_rollouts(
    env_set: EnvSet,
    params: PolicyParams,
    weights: np.ndarray,
    buffer: RolloutBuffer,
    master: RngStream,
    global_step: int,
    workspace: dict | None = None,
) -> tuple[np.ndarray, int]:
    """Fill the buffer by stepping every environment ``buffer.steps`` times.

    Returns the bootstrap values of the post-rollout states and the advanced
    global step counter. Exploration noise is drawn from a per-step stream,
    so collection is reproducible and resumable.
    """
    sigma = math.exp(params.log_std)
    n = env_set.config.population_size
    for step in range(buffer.steps):
        obs = weights[None, None, :, None] * env_set.cur_alleles
        scores, values = batch_score_value(obs, env_set.cur_progress, params, workspace)
        noise = master.child(_NOISE, global_step).generator().standard_normal(scores.shape)
        actions = scores + sigma * noise
        z = (actions - scores) / sigma
        log_probs = (
            -0.5 * np.einsum("ij,ij->i", z, z)
            - n * params.log_std
            - 0.5 * n * math.log(2.0 * math.pi)
        )

        buffer.alleles[step] = env_set.cur_alleles
        buffer.progress[step] = env_set.cur_progress
        buffer.actions[step] = actions
        buffer.log_probs[step] = log_probs
        buffer.values[step] = values
        for e in range(env_set.config.num_envs):
            reward, done = env_set.step(e, actions[e], master)
            buffer.rewards[step, e] = reward
            buffer.dones[step, e] = done
        global_step += 1

    obs = weights[None, None, :, None] * env_set.cur_alleles
    _, bootstrap = batch_score_value(obs, env_set.cur_progress, params, workspace)
    return bootstrap, global_step


# ---------------------------------------------------------------------------
# PPO update
# ---------------------------------------------------------------------------


def ppo_losses(scores, values, log_std, actions, old_log_probs, advantages, returns, clip_ratio):
    """Clipped-surrogate PPO losses for one minibatch; also returns gradients
    w.r.t. the network outputs.

    All inputs are per-sample arrays: ``scores``/``actions`` (B, n), the rest
    (B,). Returns a dict of scalar losses/diagnostics plus the gradient
    seeds (d_scores, d_values, d_log_std_policy).
    """
    b, n = scores.shape
    sigma2 = math.exp(2.0 * log_std)
    diff = actions - scores
    z2 = np.einsum("ij,ij->i", diff, diff) / sigma2
    log_probs = -0.5 * z2 - n * log_std - 0.5 * n * math.log(2.0 * math.pi)
    ratio = np.exp(log_probs - old_log_probs)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantages
    policy_loss = -float(np.minimum(surr1, surr2).mean())
    value_loss = float(((values - returns) ** 2).mean())

    unclipped = surr1 <= surr2
    d_log_probs = -(advantages * ratio * unclipped) / b
    d_scores = d_log_probs[:, None] * (diff / sigma2)
    d_values = 2.0 * (values - returns) / b
    d_log_std = float(d_log_probs @ (z2 - n))

    clip_fraction = float((np.abs(ratio - 1.0) > clip_ratio).mean())
    approx_kl = float(((ratio - 1.0) - np.log(ratio)).mean())
    return {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "clip_fraction": clip_fraction,
        "approx_kl": approx_kl,
        "d_scores": d_scores,
        "d_values": d_values,
        "d_log_std": d_log_std,
    }


def ppo_update(
    params: PolicyParams,
    optimizer: Adam,
    buffer: RolloutBuffer,
    config: TrainConfig,
    weights: np.ndarray,
    master: RngStream,
    update_idx: int,
    workspace: dict | None = None,
) -> dict:
    """Run the epoch/minibatch PPO update over a finished rollout buffer."""
    flat = buffer.size
    n = config.population_size
    alleles = buffer.alleles.reshape(flat, n, -1, 2)
    progress = buffer.progress.reshape(flat)
    actions = buffer.actions.reshape(flat, n)
    old_log_probs = buffer.log_probs.reshape(flat)
    returns = buffer.returns.reshape(flat)

    advantages = buffer.advantages.reshape(flat)
    advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    metrics = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
               "clip_fraction": 0.0, "approx_kl": 0.0}
    batches = 0
    for epoch in range(config.epochs_per_update):
        perm = master.child(_SHUFFLE, update_idx, epoch).generator().permutation(flat)
        for start in range(0, flat, config.minibatch_size):
            idx = perm[start : start + config.minibatch_size]
            b = idx.shape[0]
            obs = weights[None, None, :, None] * alleles[idx]
            g = np.repeat(progress[idx], n)
            scores_flat, plant_values, cache = _forward_plants(
                params, obs.reshape(b * n, obs.shape[2], 2), g,
                need_cache=True, workspace=workspace,
            )
            scores = scores_flat.reshape(b, n)
            values = np.array([plant_value_mean(row) for row in plant_values.reshape(b, n)])

            out = ppo_losses(
                scores, values, params.log_std, actions[idx], old_log_probs[idx],
                advantages[idx], returns[idx], config.clip_ratio,
            )
            entropy = gaussian_entropy(n, params.log_std)
            loss = (
                out["policy_loss"]
                + config.value_coef * out["value_loss"]
                - config.entropy_coef * entropy
            )
            if not math.isfinite(loss):
                raise NumericsError(
                    f"non-finite loss at update {update_idx}: "
                    f"policy={out['policy_loss']}, value={out['value_loss']}"
                )

            d_scores = out["d_scores"].reshape(b * n)
            d_plant_values = np.repeat(config.value_coef * out["d_values"] / n, n)
            grads, _ = _backward_plants(
                params, cache, d_scores, d_plant_values, workspace=workspace
            )
            grads["log_std"] = np.asarray(out["d_log_std"] - config.entropy_coef * n)
            clip_grad_norm(grads, config.max_grad_norm)
            optimizer.step(params.tensors, grads)

            metrics["policy_loss"] += out["policy_loss"]
            metrics["value_loss"] += out["value_loss"]
            metrics["entropy"] += entropy
            metrics["clip_fraction"] += out["clip_fraction"]
            metrics["approx_kl"] += out["approx_kl"]
            batches += 1
    return {k: v / batches for k, v in metrics.items()}


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def run_episode(env, params: PolicyParams, seed: int) -> float:
    """One deterministic-policy episode; returns the undiscounted return."""
    obs = env.reset(seed)
    total = 0.0
    while True:
        scores, _ = score_and_value(obs["weighted_genomes"], obs["progress"], params)
        result = env.step(scores)
        total += result.reward
        if result.terminated:
            return total
        obs = result.observation


def eval_seeds(config: TrainConfig) -> list[int]:
    master = RngStream(config.master_seed)
    return [master.child(_EVAL, i).integer() for i in range(config.eval_episodes)]


def _eval_episode_task(seed, params, dataset, config, horizon):
    env = SelectionScores(
        dataset,
        population_size=config.population_size,
        top_k=config.top_k,
        n_crosses=config.n_crosses,
        horizon=horizon,
        reward_mode=config.reward_mode,
        aggregation=config.aggregation,
    )
    return run_episode(env, params, seed)


def evaluate_params(params: PolicyParams, dataset: FounderDataset, config: TrainConfig,
                    horizon: int, seeds: list[int], workers: int = 1) -> np.ndarray:
    """Deterministic-policy returns over the given episode seeds.

    Episodes are independent units with their own streams, so the worker
    count never changes the returned values.
    """
    from functools import partial

    from .runio import run_indexed

    task = partial(
        _eval_episode_task, params=params, dataset=dataset, config=config, horizon=horizon
    )
    return np.array(run_indexed(task, seeds, workers))


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def _save_training_checkpoint(directory, params, optimizer, env_set, counters, config):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_checkpoint(directory / "policy.ckpt", params)
    arrays = optimizer.state_arrays()
    arrays.update(
        steps_done=np.asarray(counters["steps_done"]),
        update_idx=np.asarray(counters["update_idx"]),
        global_step=np.asarray(counters["global_step"]),
        episode_counters=env_set.episode_counters,
        horizon=np.asarray(env_set.horizon),
        env_alleles=np.stack([env.population.genotypes for env in env_set.envs]),
        env_t=np.asarray([env.t for env in env_set.envs]),
        env_seeds=np.asarray([env.episode_seed for env in env_set.envs]),
    )
    np.savez(directory / "trainer_state.npz", **arrays)
    with open(directory / "state.json", "w") as fh:
        json.dump({"config": asdict(config)}, fh, indent=2, sort_keys=True, default=list)


def _load_training_checkpoint(directory, dataset, config):
    directory = Path(directory)
    params = load_checkpoint(directory / "policy.ckpt")
    state = np.load(directory / "trainer_state.npz")
    with open(directory / "state.json") as fh:
        saved = json.load(fh)["config"]
    current = json.loads(json.dumps(asdict(config), default=list))
    if saved != current:
        raise ConfigError("resume config does not match the checkpointed config")
    optimizer = Adam(params.tensors, config.learning_rate)
    optimizer.load_state_arrays(state)
    env_set = EnvSet(dataset, config, int(state["horizon"]))
    env_set.episode_counters = state["episode_counters"].astype(np.int64)
    for e, env in enumerate(env_set.envs):
        env.restore(int(state["env_seeds"][e]), int(state["env_t"][e]), state["env_alleles"][e])
        env_set._sync(e)
    counters = {
        "steps_done": int(state["steps_done"]),
        "update_idx": int(state["update_idx"]),
        "global_step": int(state["global_step"]),
    }
    return params, optimizer, env_set, counters


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def train(dataset: FounderDataset, config: TrainConfig, out_dir, resume_from=None,
          workers: int = 1) -> dict:
    """Run PPO training; writes metrics CSV and checkpoints under ``out_dir``.

    ``workers`` parallelizes evaluation episodes only and never changes any
    result. Returns a summary with artifact paths and the final evaluation
    scores.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    master = RngStream(config.master_seed)
    weights = dataset.model.weights
    net_config = NetConfig(markers=dataset.n_loci)

    if resume_from is not None:
        params, optimizer, env_set, counters = _load_training_checkpoint(
            resume_from, dataset, config
        )
    else:
        params = init_params(net_config, master.child(_INIT))
        optimizer = Adam(params.tensors, config.learning_rate)
        env_set = EnvSet(dataset, config, config.horizon_at(0.0))
        env_set.reset_all(master)
        counters = {"steps_done": 0, "update_idx": 0, "global_step": 0}

    steps_per_update = config.rollout_length * config.num_envs
    n_updates = max(1, math.ceil(config.total_steps / steps_per_update))
    seeds = eval_seeds(config)
    metrics_path = out / "metrics.csv"
    final_dir = out / "checkpoint_final"
    last_eval = None
    workspace: dict = {}

    with open(metrics_path, "w", newline="") as metrics_file:
        writer = csv.writer(metrics_file)
        writer.writerow(METRICS_HEADER)
        while counters["update_idx"] < n_updates:
            update_idx = counters["update_idx"]
            progress = counters["steps_done"] / config.total_steps
            target_horizon = config.horizon_at(progress)
            if target_horizon != env_set.horizon:
                env_set = EnvSet(dataset, config, target_horizon)
                env_set.episode_counters = _carry_counters(env_set, counters)
                env_set.reset_all(master)

            buffer = RolloutBuffer(
                config.rollout_length, config.num_envs, config.population_size, dataset.n_loci
            )
            try:
                bootstrap, counters["global_step"] = collect_rollouts(
                    env_set, params, weights, buffer, master,
                    counters["global_step"], workspace,
                )
                buffer.finish(bootstrap, config.gamma, config.gae_lambda)
                update_metrics = ppo_update(
                    params, optimizer, buffer, config, weights, master,
                    update_idx, workspace,
                )
            except NumericsError:
                _save_training_checkpoint(
                    out / "checkpoint_abort", params, optimizer, env_set, counters, config
                )
                raise
            counters["steps_done"] += steps_per_update
            counters["update_idx"] += 1
            counters["episode_counters"] = env_set.episode_counters

            is_last = counters["update_idx"] >= n_updates
            evaluated = is_last or (
                config.eval_every > 0 and counters["update_idx"] % config.eval_every == 0
            )
            if evaluated:
                returns = evaluate_params(
                    params, dataset, config, config.final_horizon, seeds, workers
                )
                last_eval = returns
                eval_field = repr(float(returns.mean()))
            else:
                eval_field = ""
            writer.writerow(
                [
                    str(counters["steps_done"]),
                    eval_field,
                    repr(update_metrics["policy_loss"]),
                    repr(update_metrics["value_loss"]),
                    repr(update_metrics["entropy"]),
                    repr(update_metrics["clip_fraction"]),
                    repr(update_metrics["approx_kl"]),
                    str(env_set.horizon),
                ]
            )
            metrics_file.flush()

            if config.checkpoint_every > 0 and counters["update_idx"] % config.checkpoint_every == 0:
                _save_training_checkpoint(
                    out / "checkpoints" / f"update_{counters['update_idx']:05d}",
                    params, optimizer, env_set, counters, config,
                )

    _save_training_checkpoint(final_dir, params, optimizer, env_set, counters, config)
    return {
        "steps": counters["steps_done"],
        "updates": counters["update_idx"],
        "checkpoint": str(final_dir / "policy.ckpt"),
        "checkpoint_dir": str(final_dir),
        "metrics": str(metrics_path),
        "final_eval_returns": None if last_eval is None else [float(x) for x in last_eval],
        "final_eval_mean": None if last_eval is None else float(last_eval.mean()),
    }


def _carry_counters(env_set: EnvSet, counters: dict) -> np.ndarray:
    carried = counters.get("episode_counters")
    if carried is None:
        return env_set.episode_counters
    return np.asarray(carried, dtype=np.int64)
