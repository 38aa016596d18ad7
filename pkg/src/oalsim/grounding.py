"""Score active-test regions against a description and produce the guess.

A region's weighted score is the sum over description predicates of the
classifier decision times that classifier's estimated F1. Untrained predicates
keep their -1 decisions in the unweighted sum but contribute nothing to the
weighted one (their trust weight is 0). Ties break to the lowest region id so
replays are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Region
from .perception import PredicateModel, decide


@dataclass(frozen=True)
class GuessScores:
    region_ids: tuple[str, ...]
    weighted: tuple[float, ...]
    unweighted: tuple[int, ...]
    argmax: str

    def ranked(self) -> list[str]:
        """Region ids by descending weighted score, ties by ascending id."""
        order = sorted(
            range(len(self.region_ids)),
            key=lambda i: (-self.weighted[i], self.region_ids[i]),
        )
        return [self.region_ids[i] for i in order]

    def weighted_of(self, region_id: str) -> float:
        return self.weighted[self.region_ids.index(region_id)]


def score_objects(
    description_predicates: Sequence[str],
    models: Mapping[str, PredicateModel],
    active_test: Sequence[Region],
) -> GuessScores:
    if not description_predicates:
        raise ValueError("description predicates empty")
    if not active_test:
        raise ValueError("active test set empty")
    ids = tuple(r.id for r in active_test)
    weighted = []
    unweighted = []
    for region in active_test:
        w = 0.0
        u = 0
        for p in description_predicates:
            model = models.get(p)
            d = decide(model, region.features)
            c = model.f1 if model is not None else 0.0
            w += d * c
            u += d
        weighted.append(w)
        unweighted.append(u)
    best = min(range(len(ids)), key=lambda i: (-weighted[i], ids[i]))
    return GuessScores(
        region_ids=ids,
        weighted=tuple(weighted),
        unweighted=tuple(unweighted),
        argmax=ids[best],
    )


def best_guess(scores: GuessScores) -> str:
    return scores.argmax
