"""Per-turn candidate action beams.

Query predicates are sampled from a triangular distribution over estimated F1:
weight rises linearly from w_min at F1=0 to w_max at the peak C_max, then falls
back to w_min at F1=1. That focuses queries on classifiers that are improvable
but not already good. Label queries pair the sampled predicate with the
unlabeled active-train object closest to its hyperplane (uncertainty sampling);
untrained predicates fall back to a uniform object pick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .actions import Action, ExampleQuery, Guess, LabelQuery
from .errors import DataError
from .perception import PredicateModel, margin


@dataclass(frozen=True)
class TriangularWeights:
    w_min: float = 0.1
    w_max: float = 1.0
    c_max: float = 0.6

    def __post_init__(self):
        if not (0.0 < self.w_min < self.w_max):
            raise DataError(f"need 0 < w_min < w_max, got {self.w_min}, {self.w_max}")
        if not (0.0 < self.c_max < 1.0):
            raise DataError(f"c_max must lie in (0,1), got {self.c_max}")


@dataclass(frozen=True)
class BeamConfig:
    n_label: int = 3
    n_example: int = 3


def predicate_weight(c: float, params: TriangularWeights) -> float:
    """Piecewise-linear sampling weight, peaked at c_max, floored at w_min."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"estimated F1 {c} outside [0,1]")
    span = params.w_max - params.w_min
    if c <= params.c_max:
        return params.w_min + (c / params.c_max) * span
    return params.w_min + ((1.0 - c) / (1.0 - params.c_max)) * span


def sample_predicates(
    predicates: Sequence[str],
    f1_of: Callable[[str], float],
    count: int,
    params: TriangularWeights,
    rng: np.random.Generator,
) -> list[str]:
    """Sample without replacement under triangular weights; exhaust small pools."""
    if not predicates:
        raise DataError("no predicates to sample from")
    pool = list(predicates)
    if len(pool) <= count:
        return pool
    weights = np.array([predicate_weight(f1_of(p), params) for p in pool])
    chosen: list[str] = []
    alive = np.ones(len(pool), dtype=bool)
    for _ in range(count):
        w = weights * alive
        probs = w / w.sum()
        idx = int(rng.choice(len(pool), p=probs))
        chosen.append(pool[idx])
        alive[idx] = False
    return chosen


def best_object_for_predicate(
    predicate: str,
    model: PredicateModel | None,
    active_train: Sequence[str],
    features: Mapping[str, np.ndarray],
    labeled: frozenset[str] | set[str],
    rng: np.random.Generator,
) -> str:
    """Minimal-margin unlabeled object; uniform fallback when no hyperplane exists."""
    candidates = [rid for rid in active_train if rid not in labeled]
    if not candidates:
        raise DataError(f"all ({predicate!r}, object) pairs already labeled")
    if model is None or model.weights is None:
        return candidates[int(rng.integers(len(candidates)))]
    return min(candidates, key=lambda rid: (margin(model, features[rid]), rid))


def build_beam(
    turn: int,
    t_max: int,
    predicates: Sequence[str],
    models: Mapping[str, PredicateModel],
    active_train: Sequence[str],
    features: Mapping[str, np.ndarray],
    labeled_pairs: Callable[[str], set[str]],
    asked_examples: frozenset[str] | set[str],
    params: TriangularWeights,
    cfg: BeamConfig,
    rng: np.random.Generator,
) -> list[Action]:
    """Guess plus up to n_label label queries and n_example example queries.

    At the turn cap the beam collapses to the forced guess. Label candidates
    skip predicates whose active-train pairs are all labeled; example
    candidates skip predicates already example-queried this episode.
    """
    beam: list[Action] = [Guess()]
    if turn >= t_max:
        return beam

    def f1_of(p: str) -> float:
        m = models.get(p)
        return m.f1 if m is not None else 0.0

    ordered = sorted(predicates)
    for p in sample_predicates(ordered, f1_of, cfg.n_label, params, rng):
        done = labeled_pairs(p)
        unlabeled = [rid for rid in active_train if rid not in done]
        if not unlabeled:
            continue
        obj = best_object_for_predicate(p, models.get(p), active_train, features, done, rng)
        beam.append(LabelQuery(predicate=p, region_id=obj))

    example_pool = [p for p in ordered if p not in asked_examples]
    if example_pool:
        for p in sample_predicates(example_pool, f1_of, cfg.n_example, params, rng):
            beam.append(ExampleQuery(predicate=p))
    return beam
