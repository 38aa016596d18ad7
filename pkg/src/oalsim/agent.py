"""Mutable agent state: classifiers, usage stats, and the seen-predicate set.

Classifier weights and stats are frozen during a batch and refreshed only at
batch boundaries. The seen-predicate set grows as soon as a description is
read, so the candidate generator always has predicates to sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError
from .perception import PredicateModel
from .policy import AgentStats


@dataclass
class Agent:
    models: dict[str, PredicateModel] = field(default_factory=dict)
    stats: AgentStats = field(default_factory=AgentStats)
    predicates: set[str] = field(default_factory=set)

    def reset(self) -> None:
        """Drop all classifiers, stats, and seen predicates (phase boundary)."""
        self.models = {}
        self.stats = AgentStats()
        self.predicates = set()

    def base_labels(self) -> dict[str, dict[str, int]]:
        return {p: m.labels for p, m in self.models.items()}

    def to_dict(self) -> dict:
        return {
            "models": {
                p: {
                    "labels": dict(m.labels),
                    "weights": None if m.weights is None else [float(v) for v in m.weights],
                    "f1": m.f1,
                }
                for p, m in sorted(self.models.items())
            },
            "stats": {
                "used": dict(self.stats.used),
                "succeeded": dict(self.stats.succeeded),
                "dialogs": self.stats.dialogs,
            },
            "predicates": sorted(self.predicates),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Agent":
        try:
            models = {}
            for p, m in data["models"].items():
                models[p] = PredicateModel(
                    predicate=p,
                    labels={rid: int(lbl) for rid, lbl in m["labels"].items()},
                    weights=None if m["weights"] is None else np.asarray(m["weights"]),
                    f1=float(m["f1"]),
                )
            stats = AgentStats(
                used={p: int(v) for p, v in data["stats"]["used"].items()},
                succeeded={p: int(v) for p, v in data["stats"]["succeeded"].items()},
                dialogs=int(data["stats"]["dialogs"]),
            )
            return cls(models=models, stats=stats, predicates=set(data["predicates"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"malformed agent state: {exc}") from exc
