"""The episodic MDP: lifecycle, oracle answers, rewards, termination.

One episode is one interaction: the agent may query about active-train objects
(cost -1 each) and must eventually guess among the active-test objects (+200
correct, -100 incorrect, episode over). The oracle answers from ground-truth
annotations under a closed world: a predicate absent from an object's
annotation list is negative. Labels acquired in-episode queue up for the
batch-end classifier refresh; within the episode they only gate which query
pairs remain askable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .actions import Action, ExampleQuery, Guess, LabelQuery, describe
from .corpus import Interaction, Region
from .errors import ContractError, DataError, ProtocolError


@dataclass(frozen=True)
class RewardConfig:
    correct_guess: float = 200.0
    incorrect_guess: float = -100.0
    per_query: float = -1.0
    discount: float = 1.0

    def __post_init__(self):
        if not (self.correct_guess > 0 > self.per_query):
            raise DataError("need correct_guess > 0 > per_query")
        if not (self.incorrect_guess < self.per_query):
            raise DataError("need incorrect_guess < per_query")
        if not (0.0 < self.discount <= 1.0):
            raise DataError("discount must lie in (0,1]")


@dataclass
class TranscriptStep:
    action: Action
    reward: float
    beam_features: np.ndarray | None = None  # (n_candidates, F)
    chosen: int | None = None


NONE_ANSWER = None  # example query with no positive object in the active training set


class Episode:
    """Mutable state of one interaction, plus the oracle that answers queries."""

    def __init__(
        self,
        interaction: Interaction,
        regions: Mapping[str, Region],
        base_labels: Mapping[str, Mapping[str, int]],
        rewards: RewardConfig,
        t_max: int,
        oracle_rng: np.random.Generator,
        guesser: Callable[[], str],
    ):
        if not interaction.description_predicates:
            raise DataError("interaction has no description predicates")
        self.interaction = interaction
        self.regions = regions
        self.rewards = rewards
        self.t_max = t_max
        self._oracle_rng = oracle_rng
        self._guesser = guesser
        self._base_labels = base_labels

        self.turn = 0
        self.terminated = False
        self.guessed: str | None = None
        self.success = False
        self.pending_labels: list[tuple[str, str, int]] = []
        self._pending_index: dict[tuple[str, str], int] = {}
        self.asked_examples: set[str] = set()
        self.transcript: list[TranscriptStep] = []

    # -- label bookkeeping ------------------------------------------------

    def labeled_pairs(self, predicate: str) -> set[str]:
        """Region ids already labeled for the predicate (snapshot + this episode)."""
        out = set(self._base_labels.get(predicate, {}))
        out.update(rid for (p, rid) in self._pending_index if p == predicate)
        return out

    def _record(self, predicate: str, region_id: str, label: int) -> None:
        base = self._base_labels.get(predicate, {})
        if region_id in base:
            if base[region_id] != label:
                raise ContractError(
                    f"oracle flipped label for ({predicate!r}, {region_id!r})"
                )
            return
        key = (predicate, region_id)
        if key in self._pending_index:
            if self.pending_labels[self._pending_index[key]][2] != label:
                raise ContractError(
                    f"oracle flipped label for ({predicate!r}, {region_id!r})"
                )
            return
        self._pending_index[key] = len(self.pending_labels)
        self.pending_labels.append((predicate, region_id, label))

    # -- oracle -----------------------------------------------------------

    def answer_label_query(self, predicate: str, region_id: str) -> int:
        if region_id not in self.interaction.active_train:
            raise ProtocolError(
                f"label query on {region_id!r}, outside the active training set"
            )
        label = 1 if predicate in self.regions[region_id].annotations else -1
        self._record(predicate, region_id, label)
        return label

    def answer_example_query(self, predicate: str) -> str | None:
        positives = [
            rid
            for rid in self.interaction.active_train
            if predicate in self.regions[rid].annotations
        ]
        if positives:
            chosen = positives[int(self._oracle_rng.integers(len(positives)))]
            self._record(predicate, chosen, 1)
            return chosen
        for rid in self.interaction.active_train:
            self._record(predicate, rid, -1)
        return NONE_ANSWER

    # -- transitions --------------------------------------------------------

    def step(
        self,
        action: Action,
        beam_features: np.ndarray | None = None,
        chosen: int | None = None,
    ) -> tuple[float, bool]:
        if self.terminated:
            raise ProtocolError("step on a terminated episode")
        if self.turn >= self.t_max and not isinstance(action, Guess):
            raise ProtocolError(f"turn cap {self.t_max} reached; only the guess is admissible")

        if isinstance(action, Guess):
            self.guessed = self._guesser()
            self.success = self.guessed == self.interaction.target
            reward = (
                self.rewards.correct_guess if self.success else self.rewards.incorrect_guess
            )
            self.terminated = True
        elif isinstance(action, LabelQuery):
            self.answer_label_query(action.predicate, action.region_id)
            reward = self.rewards.per_query
        elif isinstance(action, ExampleQuery):
            self.answer_example_query(action.predicate)
            self.asked_examples.add(action.predicate)
            reward = self.rewards.per_query
        else:
            raise ProtocolError(f"unknown action {action!r}")

        self.turn += 1
        self.transcript.append(
            TranscriptStep(action=action, reward=reward, beam_features=beam_features, chosen=chosen)
        )
        return reward, self.terminated

    # -- derived quantities -------------------------------------------------

    def rewards_seq(self) -> list[float]:
        return [step.reward for step in self.transcript]

    def n_queries(self) -> int:
        return self.turn - 1 if self.terminated else self.turn

    def length(self) -> int:
        """System turns: queries plus the terminating guess."""
        if not self.terminated:
            raise ContractError("length of an unterminated episode")
        return self.turn


def episode_return(rewards: Sequence[float], gamma: float) -> list[float]:
    """Per-step discounted reward tails G_t."""
    if not rewards:
        raise ContractError("empty transcript")
    out = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def returns_for(episode: Episode, gamma: float) -> list[float]:
    if not episode.terminated:
        raise ContractError("returns of an unterminated episode")
    return episode_return(episode.rewards_seq(), gamma)


def transcript_records(episode_id: str, episode: Episode):
    """One flat record per action: id, turn, descriptor, reward, chosen features."""
    for t, step in enumerate(episode.transcript):
        feats = None
        if step.beam_features is not None and step.chosen is not None:
            feats = [float(v) for v in step.beam_features[step.chosen]]
        yield {
            "episode": episode_id,
            "turn": t,
            "action": describe(step.action),
            "reward": step.reward,
            "features": feats,
        }


def export_transcripts(path, episodes: Sequence[tuple[str, Episode]]) -> None:
    """Line-delimited export for offline analysis."""
    with open(path, "w", encoding="utf-8") as fh:
        for episode_id, ep in episodes:
            for rec in transcript_records(episode_id, ep):
                fh.write(json.dumps(rec) + "\n")
