"""Episodic breeding-program environments.

Four seeded state machines share one reset/step contract and differ in what
the agent observes and controls:

* :class:`BreedingGym`: raw genomes in, arbitrary cross plans out. Both the
  observation and the action have a variable leading dimension.
* :class:`SimplifiedBreedingGym`: fixed population size; the agent picks how
  many plants to keep (truncation selection on estimated trait) and how many
  random crosses to make among them.
* :class:`SelectionScores`: the agent scores every plant; the top k are kept
  and crossed randomly. Observations are effect-weighted genomes plus the
  episode completion fraction.
* :class:`PairScore`: the agent scores every candidate parent pair; the top
  n cells of the symmetrized matrix become the cross plan.

Episodes run a fixed horizon of T steps. Rewards aggregate estimated traits
over the population, either every step or only at the end of the program.
All randomness derives from the reset seed, so a recorded (seed, action
sequence) replays every observation bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from . import genome as gc
from .data_io import FounderDataset, load_dataset, resolve_data_paths
from .errors import ActionError, ConfigError
from .genome import Population
from .meiosis import CrossPlan, cross_batch
from .rng import RngStream

REWARD_MODES = ("terminal", "per_step")
AGGREGATIONS = ("max", "mean")

# Sub-stream labels within one episode step.
_PAIR_DRAW = 0
_CROSS = 1


@dataclass(frozen=True)
class StepResult:
    """Outcome of one environment step."""

    observation: Any
    reward: float
    terminated: bool
    truncated: bool
    info: dict


class BreedingEnv:
    """Shared core: founder sampling, horizon bookkeeping, reward computation.

    One instance is a single-threaded state machine; run many instances with
    independent seeds for parallelism.
    """

    def __init__(
        self,
        dataset: FounderDataset,
        population_size: int,
        horizon: int,
        reward_mode: str = "terminal",
        aggregation: str = "max",
        gamma: float = 1.0,
        default_seed: int = 0,
    ):
        if population_size < 1:
            raise ConfigError("population size must be >= 1")
        if dataset.n_founders < population_size:
            raise ConfigError(
                f"founder pool of {dataset.n_founders} cannot seed a population of {population_size}"
            )
        if horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward mode must be one of {REWARD_MODES}, got {reward_mode!r}")
        if aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")
        if not (0.0 < gamma <= 1.0):
            raise ConfigError("gamma must lie in (0, 1]")
        self.dataset = dataset
        self.population_size = population_size
        self.horizon = horizon
        self.reward_mode = reward_mode
        self.aggregation = aggregation
        self.gamma = gamma
        self.default_seed = default_seed
        self.model = dataset.model
        self.map = dataset.map
        self._pop: Population | None = None
        self._t = 0
        self._episode_seed: int | None = None
        self._stream: RngStream | None = None

    # -- state ------------------------------------------------------------

    @property
    def population(self) -> Population:
        if self._pop is None:
            raise ConfigError("environment must be reset before use")
        return self._pop

    @property
    def t(self) -> int:
        return self._t

    @property
    def episode_seed(self) -> int | None:
        return self._episode_seed

    def traits(self) -> np.ndarray:
        return gc.population_traits(self.population, self.model)

    # -- episode control ----------------------------------------------------

    def reset(self, seed: int | None = None):
        """Start a new episode: sample the initial population from the founders."""
        if seed is None:
            seed = self.default_seed
        self._episode_seed = int(seed)
        self._stream = RngStream(self._episode_seed)
        gen = self._stream.child(0).generator()
        idx = gen.choice(self.dataset.n_founders, size=self.population_size, replace=False)
        self._pop = Population(
            members=tuple(self.dataset.genotypes[i] for i in idx), generation=0
        )
        self._t = 0
        return self._observe()

    def restore(self, seed: int, t: int, genotypes: np.ndarray) -> None:
        """Restore a mid-episode snapshot (used by training checkpoints)."""
        self._episode_seed = int(seed)
        self._stream = RngStream(self._episode_seed)
        self._t = int(t)
        self._pop = Population(
            members=tuple(gc.Genome(genotypes[i]) for i in range(genotypes.shape[0])),
            generation=int(t),
        )

    def step(self, action) -> StepResult:
        if self._pop is None:
            raise ConfigError("environment must be reset before stepping")
        if self._t >= self.horizon:
            raise ActionError("episode is over; call reset() to start a new one")
        step_stream = self._stream.child(self._t + 1)
        plan = self._plan_from_action(action, step_stream.child(_PAIR_DRAW))
        self._pop = cross_batch(self._pop, plan, self.map, step_stream.child(_CROSS))
        self._t += 1
        terminated = self._t == self.horizon

        traits = self.traits()
        if self.reward_mode == "per_step" or terminated:
            reward = gc.aggregate(traits, self.aggregation)
        else:
            reward = 0.0
        info = {
            "generation": self._t,
            "traits": traits,
            "best_trait": float(traits.max()),
            "mean_trait": float(traits.mean()),
        }
        return StepResult(
            observation=self._observe(),
            reward=float(reward),
            terminated=terminated,
            truncated=False,
            info=info,
        )

    # -- hooks for subclasses ------------------------------------------------

    def _plan_from_action(self, action, pair_stream: RngStream) -> CrossPlan:
        raise NotImplementedError

    def _observe(self):
        raise NotImplementedError

    # -- helpers --------------------------------------------------------------

    @staticmethod
    def _even_split(total: int, parts: int) -> list[int]:
        """Split ``total`` into ``parts`` counts that differ by at most one."""
        base, extra = divmod(total, parts)
        return [base + 1 if j < extra else base for j in range(parts)]

    def _random_cross_plan(
        self, selected: np.ndarray, n_crosses: int, offspring_total: int, pair_stream: RngStream
    ) -> CrossPlan:
        """Uniform random crosses among ``selected`` (distinct pair members).

        Offspring counts are split as evenly as possible so the next
        population has exactly ``offspring_total`` members.
        """
        gen = pair_stream.generator()
        counts = self._even_split(offspring_total, n_crosses)
        pairs: list[tuple[int, int]] = []
        for j in range(n_crosses):
            a, b = gen.choice(selected.shape[0], size=2, replace=False)
            pair = (int(selected[a]), int(selected[b]))
            pairs.extend([pair] * counts[j])
        return CrossPlan(tuple(pairs))


def _top_indices(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest values; ties go to the lower index."""
    return np.argsort(-values, kind="stable")[:count]


class BreedingGym(BreedingEnv):
    """Full-control environment: raw genomes observed, arbitrary crosses allowed.

    The action is a sequence of parent-index pairs (or a :class:`CrossPlan`);
    the next population has one offspring per pair, so its size is the plan
    length.
    """

    def _plan_from_action(self, action, pair_stream: RngStream) -> CrossPlan:
        if isinstance(action, CrossPlan):
            return action
        action = np.asarray(action)
        if action.size == 0:
            raise ActionError("cross plan must contain at least one pair")
        if action.ndim != 2 or action.shape[1] != 2:
            raise ActionError(f"expected a sequence of index pairs, got shape {action.shape}")
        if not np.issubdtype(action.dtype, np.integer):
            raise ActionError("parent indices must be integers")
        return CrossPlan(tuple((int(a), int(b)) for a, b in action))

    def _observe(self) -> np.ndarray:
        return self.population.genotypes.copy()


class SimplifiedBreedingGym(BreedingEnv):
    """Fixed-size environment driven by two scalars: keep-count and cross-count.

    The ``n_select`` plants with the highest estimated trait are retained
    (ties resolved toward the lower index) and ``n_crosses`` random pairs of
    distinct retained plants produce offspring, allocated as evenly as
    possible so the population size never changes. The observation reports
    each plant's estimated trait ("yield") and its genome correlation with
    the population mean profile.
    """

    def __init__(self, dataset, population_size, horizon, **kwargs):
        if population_size < 2:
            raise ConfigError("simplified environment needs a population of at least 2")
        super().__init__(dataset, population_size, horizon, **kwargs)

    def _plan_from_action(self, action, pair_stream: RngStream) -> CrossPlan:
        try:
            n_select = int(action["n_select"])
            n_crosses = int(action["n_crosses"])
        except (KeyError, TypeError, ValueError):
            raise ActionError(
                "action must be a mapping with integer fields 'n_select' and 'n_crosses'"
            ) from None
        n = self.population.size
        if not (2 <= n_select <= n):
            raise ActionError(f"n_select must lie in [2, {n}], got {n_select}")
        if n_crosses < 1:
            raise ActionError(f"n_crosses must be >= 1, got {n_crosses}")
        selected = np.sort(_top_indices(self.traits(), n_select))
        return self._random_cross_plan(selected, n_crosses, n, pair_stream)

    def _observe(self) -> dict:
        corr = gc.genome_correlation(self.population)
        return {"yield": self.traits(), "genome_correlation": corr.values}


class SelectionScores(BreedingEnv):
    """Score-per-plant environment; the scores define truncation selection.

    The agent emits one score per plant; the ``top_k`` highest-scoring plants
    (ties toward the lower index) are crossed in ``n_crosses`` random pairs
    of distinct parents, each producing an equal share of the next
    population. Observations are the effect-weighted genome tensor plus the
    completion fraction t/T, so a plant's estimated trait is recoverable by
    summing its slab.
    """

    def __init__(
        self,
        dataset: FounderDataset,
        population_size: int = 200,
        top_k: int = 20,
        n_crosses: int = 10,
        horizon: int = 10,
        reward_mode: str = "terminal",
        aggregation: str = "max",
        gamma: float = 1.0,
        default_seed: int = 0,
    ):
        super().__init__(
            dataset,
            population_size,
            horizon,
            reward_mode=reward_mode,
            aggregation=aggregation,
            gamma=gamma,
            default_seed=default_seed,
        )
        if not (2 <= top_k <= population_size):
            raise ConfigError(f"top_k must lie in [2, {population_size}], got {top_k}")
        if n_crosses < 1:
            raise ConfigError("number of crosses must be >= 1")
        self.top_k = top_k
        self.n_crosses = n_crosses

    def _scores_from_action(self, action) -> np.ndarray:
        scores = np.asarray(action, dtype=np.float64)
        n = self.population.size
        if scores.shape != (n,):
            raise ActionError(f"expected a score vector of shape ({n},), got {scores.shape}")
        if not np.isfinite(scores).all():
            raise ActionError("scores must all be finite")
        return scores

    def _plan_from_action(self, action, pair_stream: RngStream) -> CrossPlan:
        scores = self._scores_from_action(action)
        selected = np.sort(_top_indices(scores, self.top_k))
        return self._random_cross_plan(
            selected, self.n_crosses, self.population_size, pair_stream
        )

    def _observe(self) -> dict:
        return {
            "weighted_genomes": gc.weighted_observation(self.population, self.model),
            "progress": self._t / self.horizon,
        }


class PairScore(SelectionScores):
    """Score-per-cross environment: the agent rates every candidate pair.

    The score matrix is symmetrized by a cellwise max with its transpose;
    the n highest-scoring upper-triangle cells (diagonal included, so the
    agent can request selfing) become the cross plan, one offspring each,
    keeping the population size fixed. Ties resolve in row-major order.
    """

    def __init__(
        self,
        dataset: FounderDataset,
        population_size: int = 200,
        horizon: int = 10,
        reward_mode: str = "terminal",
        aggregation: str = "max",
        gamma: float = 1.0,
        default_seed: int = 0,
    ):
        super().__init__(
            dataset,
            population_size=population_size,
            top_k=2,
            n_crosses=1,
            horizon=horizon,
            reward_mode=reward_mode,
            aggregation=aggregation,
            gamma=gamma,
            default_seed=default_seed,
        )

    def _plan_from_action(self, action, pair_stream: RngStream) -> CrossPlan:
        matrix = np.asarray(action, dtype=np.float64)
        n = self.population.size
        if matrix.shape != (n, n):
            raise ActionError(f"expected a score matrix of shape ({n}, {n}), got {matrix.shape}")
        if not np.isfinite(matrix).all():
            raise ActionError("scores must all be finite")
        sym = np.maximum(matrix, matrix.T)
        rows, cols = np.triu_indices(n)
        order = np.argsort(-sym[rows, cols], kind="stable")[:n]
        return CrossPlan(tuple((int(rows[i]), int(cols[i])) for i in order))


ENV_NAMES = {
    "breeding-gym": BreedingGym,
    "simplified-breeding-gym": SimplifiedBreedingGym,
    "selection-scores": SelectionScores,
    "pair-score": PairScore,
}


def make_env(
    name: str,
    dataset: FounderDataset,
    population_size: int = 200,
    top_k: int = 20,
    n_crosses: int = 10,
    horizon: int = 10,
    reward_mode: str = "terminal",
    aggregation: str = "max",
    gamma: float = 1.0,
    default_seed: int = 0,
) -> BreedingEnv:
    """Construct an environment by CLI name."""
    cls = ENV_NAMES.get(name)
    if cls is None:
        raise ConfigError(f"unknown environment {name!r}; choose from {sorted(ENV_NAMES)}")
    common = dict(
        dataset=dataset,
        population_size=population_size,
        horizon=horizon,
        reward_mode=reward_mode,
        aggregation=aggregation,
        gamma=gamma,
        default_seed=default_seed,
    )
    if cls is SelectionScores:
        return SelectionScores(top_k=top_k, n_crosses=n_crosses, **common)
    return cls(**common)


def env_from_config(source, dataset: FounderDataset | None = None, data_dir=None) -> BreedingEnv:
    """Build an environment from a YAML config file or an equivalent mapping.

    Recognized keys: ``env``, ``n``, ``k``, ``l``, ``T``, ``reward_mode``,
    ``aggregation``, ``gamma``, ``genotypes``, ``markers``, ``seed``. Dataset
    paths may be omitted when a dataset object is supplied directly.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            config = yaml.safe_load(fh)
    else:
        config = dict(source)
    if not isinstance(config, dict):
        raise ConfigError("environment config must be a mapping")
    known = {"env", "n", "k", "l", "T", "reward_mode", "aggregation", "gamma",
             "genotypes", "markers", "seed"}
    unknown = set(config) - known
    if unknown:
        raise ConfigError(f"unknown environment config keys: {sorted(unknown)}")
    if dataset is None:
        if "genotypes" not in config or "markers" not in config:
            raise ConfigError("config must name 'genotypes' and 'markers' dataset paths")
        gpath, mpath = resolve_data_paths(config["genotypes"], config["markers"], data_dir)
        dataset = load_dataset(gpath, mpath)
    return make_env(
        name=config.get("env", "selection-scores"),
        dataset=dataset,
        population_size=int(config.get("n", 200)),
        top_k=int(config.get("k", 20)),
        n_crosses=int(config.get("l", 10)),
        horizon=int(config.get("T", 10)),
        reward_mode=config.get("reward_mode", "terminal"),
        aggregation=config.get("aggregation", "max"),
        gamma=float(config.get("gamma", 1.0)),
        default_seed=int(config.get("seed", 0)),
    )
