"""Non-learned reference policies.

All baselines act through the score-per-plant action interface, so a learned
policy and a baseline evaluated on the same environment seed consume the
same environment randomness; the selection rule is the only difference
between them. Scores only matter through their ranking, so any positive
rescaling of a baseline's output selects the same plants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .genome import observation_trait_sums, ordered_sum


@dataclass(frozen=True)
class Policy:
    """A named mapping from observation (and a draw source) to an action."""

    name: str
    act: Callable[[dict, np.random.Generator], np.ndarray]


def _weighted_genomes(observation, model=None) -> np.ndarray:
    if isinstance(observation, dict):
        observation = observation["weighted_genomes"]
    observation = np.asarray(observation)
    if observation.ndim != 3 or observation.shape[2] != 2:
        raise ConfigError(f"expected an (n, m, 2) observation, got shape {observation.shape}")
    if observation.dtype == np.bool_:
        if model is None:
            raise ConfigError("raw genome observations need a trait model to be scored")
        observation = model.weights[None, :, None] * observation.astype(np.float64)
    return np.asarray(observation, dtype=np.float64)


def standard_gs_scores(observation, model=None) -> np.ndarray:
    """Score each plant by its estimated trait (classic genomic selection)."""
    return observation_trait_sums(_weighted_genomes(observation, model))


def ohv_scores(observation, model=None) -> np.ndarray:
    """Score each plant by its optimal haploid value.

    Rewards plants whose best haplotypes are strong even when their current
    trait estimate is mediocre.
    """
    weighted = _weighted_genomes(observation, model)
    best = np.maximum(weighted[:, :, 0], weighted[:, :, 1])
    return 2.0 * ordered_sum(best, axis=1)


def random_scores(n: int, gen: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform scores in [0, 1): selection becomes a uniform draw."""
    if n < 1:
        raise ConfigError("need at least one plant to score")
    return gen.random(n)


def make_policy(spec: str, model=None, expected_markers: int | None = None) -> Policy:
    """Build a policy from a CLI spec: standard-gs | ohv | random | learned:<ckpt>.

    ``expected_markers`` lets callers fail fast when a learned checkpoint was
    trained on a different marker count than the dataset in use.
    """
    if spec == "standard-gs":
        return Policy("standard-gs", lambda obs, gen: standard_gs_scores(obs, model))
    if spec == "ohv":
        return Policy("ohv", lambda obs, gen: ohv_scores(obs, model))
    if spec == "random":
        return Policy(
            "random",
            lambda obs, gen: random_scores(_weighted_genomes(obs, model).shape[0], gen),
        )
    if spec.startswith("learned:"):
        from .policy_net import load_checkpoint, score_and_value

        params = load_checkpoint(spec.split(":", 1)[1])
        if expected_markers is not None and params.config.markers != expected_markers:
            raise ConfigError(
                f"checkpoint was trained on {params.config.markers} markers "
                f"but the dataset has {expected_markers}"
            )

        def act(obs, gen):
            scores, _ = score_and_value(
                obs["weighted_genomes"], float(obs["progress"]), params
            )
            return scores

        return Policy("learned", act)
    raise ConfigError(
        f"unknown policy {spec!r}; choose standard-gs, ohv, random, or learned:<checkpoint>"
    )
