"""Gym-style adapter over the breedsim breeding-program environments.

Exposes the four native environments through the de-facto standard episodic
API: ``reset(seed=...) -> (observation, info)``, ``step(action) ->
(observation, reward, terminated, truncated, info)``, plus declared
``observation_space`` / ``action_space`` descriptors. The adapter performs
no computation of its own; every value passes straight through from the
native environment, so a seeded episode is bitwise identical through either
surface.

Environment ids: ``BreedingGym-v0``, ``SimplifiedBreedingGym-v0``,
``SelectionScores-v0``, ``PairScore-v0``.
"""

from __future__ import annotations

import numpy as np

from breedsim.envs import (
    BreedingEnv,
    BreedingGym,
    PairScore,
    SelectionScores,
    SimplifiedBreedingGym,
    env_from_config,
    make_env,
)

from .spaces import Box, DictSpace, Discrete, Sequence, Space, TupleSpace

__version__ = "0.1.0"

ENV_IDS = {
    "BreedingGym-v0": "breeding-gym",
    "SimplifiedBreedingGym-v0": "simplified-breeding-gym",
    "SelectionScores-v0": "selection-scores",
    "PairScore-v0": "pair-score",
}


def _spaces_for(native: BreedingEnv) -> tuple[Space, Space]:
    n = native.population_size
    m = native.dataset.n_loci
    weighted_obs = DictSpace(
        {
            "weighted_genomes": Box(-np.inf, np.inf, (n, m, 2)),
            "progress": Box(0.0, 1.0, ()),
        }
    )
    if isinstance(native, PairScore):
        return weighted_obs, Box(-np.inf, np.inf, (n, n))
    if isinstance(native, SelectionScores):
        return weighted_obs, Box(-np.inf, np.inf, (n,))
    if isinstance(native, SimplifiedBreedingGym):
        observation = DictSpace(
            {
                "yield": Box(-np.inf, np.inf, (n,)),
                "genome_correlation": Box(-1.0, 1.0, (n,)),
            }
        )
        action = DictSpace(
            {
                "n_select": Discrete(n - 1, start=2),
                "n_crosses": Discrete(n, start=1),
            }
        )
        return observation, action
    # Base environment: variable-size stacks of raw genomes and index pairs.
    # Index bounds reflect the initial population size; the native
    # environment enforces validity against the current population.
    observation = Sequence(Box(0, 1, (m, 2), dtype=np.bool_))
    action = Sequence(TupleSpace((Discrete(n), Discrete(n))))
    return observation, action


class AdapterEnv:
    """One native environment behind the standard episodic API."""

    metadata = {"render_modes": []}

    def __init__(self, native: BreedingEnv, env_id: str | None = None):
        self._native = native
        self.env_id = env_id
        self.observation_space, self.action_space = _spaces_for(native)

    @property
    def unwrapped(self) -> BreedingEnv:
        return self._native

    def reset(self, seed: int | None = None, options: dict | None = None):
        observation = self._native.reset(seed)
        return observation, {}

    def step(self, action):
        result = self._native.step(action)
        return (
            result.observation,
            result.reward,
            result.terminated,
            result.truncated,
            result.info,
        )

    def close(self):
        pass

    def __repr__(self):
        return f"AdapterEnv({self.env_id or type(self._native).__name__})"


def make(env_id: str, dataset=None, **kwargs) -> AdapterEnv:
    """Build an adapter environment by id; kwargs go to the native constructor."""
    if env_id not in ENV_IDS:
        raise KeyError(f"unknown environment id {env_id!r}; choose from {sorted(ENV_IDS)}")
    native = make_env(ENV_IDS[env_id], dataset=dataset, **kwargs)
    return AdapterEnv(native, env_id=env_id)


def make_from_config(path_or_mapping, dataset=None) -> AdapterEnv:
    """Build an adapter environment from a native config file or mapping."""
    native = env_from_config(path_or_mapping, dataset=dataset)
    reverse = {v: k for k, v in ENV_IDS.items()}
    native_name = {
        BreedingGym: "breeding-gym",
        SimplifiedBreedingGym: "simplified-breeding-gym",
        SelectionScores: "selection-scores",
        PairScore: "pair-score",
    }[type(native)]
    return AdapterEnv(native, env_id=reverse[native_name])


__all__ = [
    "AdapterEnv",
    "Box",
    "DictSpace",
    "Discrete",
    "ENV_IDS",
    "Sequence",
    "Space",
    "TupleSpace",
    "make",
    "make_from_config",
    "__version__",
]
