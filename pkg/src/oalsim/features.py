"""State-action feature registry for the dialog policy.

The registry fixes the index, name, applicable action types, ablation group,
and normalization of every feature, so ablation configs can address features
by name and logged vectors stay comparable across runs. Entries that do not
apply to an action type are exactly zero in its vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .actions import Action, ExampleQuery, Guess, LabelQuery
from .corpus import Region
from .errors import ConfigError
from .grounding import GuessScores
from .perception import DensityIndex, PredicateModel, decide, density_stats, margin
from .policy import AgentStats


@dataclass(frozen=True)
class FeatureSpec:
    index: int
    name: str
    actions: tuple[str, ...]
    group: str | None
    normalization: str


_RAW_SPECS = [
    ("turn_frac", ("guess", "label", "example"), None, "turn / T_max, in [0,1]"),
    ("act_guess", ("guess",), None, "indicator {0,1}"),
    ("act_label_query", ("label",), None, "indicator {0,1}"),
    ("act_example_query", ("example",), None, "indicator {0,1}"),
    ("guess_f1_min", ("guess",), "guess", "min F1 over description predicates, [0,1]"),
    ("guess_f1_max", ("guess",), "guess", "max F1 over description predicates, [0,1]"),
    ("guess_f1_second", ("guess",), "guess", "second-highest F1, [0,1]"),
    ("guess_f1_mean", ("guess",), "guess", "mean F1, [0,1]"),
    ("guess_top_score", ("guess",), "guess", "top weighted score / #predicates, [-1,1]"),
    ("guess_score_gap_second", ("guess",), "guess", "(top - second) weighted / #predicates, [0,2]"),
    ("guess_score_gap_mean", ("guess",), "guess", "(top - mean) weighted / #predicates, [0,2]"),
    ("guess_top_votes", ("guess",), "guess", "top decision sum / #predicates, [-1,1]"),
    ("guess_votes_gap_second", ("guess",), "guess", "(top - second) decision sum / #predicates, [0,2]"),
    ("guess_votes_gap_mean", ("guess",), "guess", "(top - mean) decision sum / #predicates, [0,2]"),
    ("guess_top2_clf_agree", ("guess",), "guess", "two most trusted classifiers agree on top region {0,1}"),
    ("guess_best_clf_decision", ("guess",), "guess", "best classifier's decision on top region {-1,1}"),
    ("guess_second_clf_decision", ("guess",), "guess", "second classifier's decision on top region {-1,1}"),
    ("guess_best_clf_decision_rel", ("guess",), "guess", "best decision minus its active-test mean, [-2,2]"),
    ("guess_second_clf_decision_rel", ("guess",), "guess", "second decision minus its active-test mean, [-2,2]"),
    ("guess_best_clf_top2_same", ("guess",), "guess", "best classifier agrees on top two regions {0,1}"),
    ("query_new_predicate", ("label", "example"), "query", "predicate has no classifier {0,1}"),
    ("query_predicate_f1", ("label", "example"), "query", "estimated F1 of queried predicate, [0,1]"),
    ("query_usage_freq", ("label", "example"), "query", "dialogs using predicate / total dialogs, [0,1]"),
    ("query_usage_success", ("label", "example"), "query", "success rate of dialogs using predicate, [0,1]"),
    ("query_opportunistic", ("label", "example"), "query", "predicate not in current description {0,1}"),
    ("label_margin", ("label",), "query", "distance of object to hyperplane, >= 0 (0 for new predicates)"),
    ("label_avg_cos_dist", ("label",), "query", "object's mean cosine distance to corpus, [0,2]"),
    ("label_knn_unlabeled", ("label",), "query", "fraction of object's k-NN unlabeled for predicate, [0,1]"),
]

REGISTRY: tuple[FeatureSpec, ...] = tuple(
    FeatureSpec(i, name, acts, group, norm)
    for i, (name, acts, group, norm) in enumerate(_RAW_SPECS)
)
N_FEATURES = len(REGISTRY)
INDEX = {spec.name: spec.index for spec in REGISTRY}
GROUPS = {
    "guess": tuple(s.name for s in REGISTRY if s.group == "guess"),
    "query": tuple(s.name for s in REGISTRY if s.group == "query"),
}


def registry_table() -> list[dict]:
    return [
        {
            "index": s.index,
            "name": s.name,
            "actions": list(s.actions),
            "group": s.group,
            "normalization": s.normalization,
        }
        for s in REGISTRY
    ]


def resolve_mask(names: Sequence[str]) -> np.ndarray:
    """Boolean mask over feature indices from feature or group names."""
    mask = np.zeros(N_FEATURES, dtype=bool)
    for name in names:
        if name in GROUPS:
            for feat in GROUPS[name]:
                mask[INDEX[feat]] = True
        elif name in INDEX:
            mask[INDEX[name]] = True
        else:
            raise ConfigError(f"unknown feature or group name {name!r}")
    return mask


@dataclass
class FeatureContext:
    """Everything featurize needs about the current turn, frozen for the step."""

    turn: int
    t_max: int
    description_predicates: tuple[str, ...]
    models: Mapping[str, PredicateModel]
    stats: AgentStats
    density: DensityIndex
    guess_scores: GuessScores
    active_test: Sequence[Region]
    features_by_id: Mapping[str, np.ndarray]
    mask: np.ndarray | None = None


def _f1_of(models: Mapping[str, PredicateModel], p: str) -> float:
    m = models.get(p)
    return m.f1 if m is not None else 0.0


def featurize(action: Action, ctx: FeatureContext) -> np.ndarray:
    vec = np.zeros(N_FEATURES)
    vec[INDEX["turn_frac"]] = ctx.turn / ctx.t_max

    if isinstance(action, Guess):
        vec[INDEX["act_guess"]] = 1.0
        _fill_guess(vec, ctx)
    elif isinstance(action, LabelQuery):
        vec[INDEX["act_label_query"]] = 1.0
        _fill_query(vec, ctx, action.predicate)
        _fill_label_object(vec, ctx, action.predicate, action.region_id)
    elif isinstance(action, ExampleQuery):
        vec[INDEX["act_example_query"]] = 1.0
        _fill_query(vec, ctx, action.predicate)

    if ctx.mask is not None:
        vec[ctx.mask] = 0.0
    return vec


def _fill_guess(vec: np.ndarray, ctx: FeatureContext) -> None:
    preds = ctx.description_predicates
    k = len(preds)
    cs = np.array([_f1_of(ctx.models, p) for p in preds])
    order = sorted(range(k), key=lambda i: (-cs[i], preds[i]))
    best_p = preds[order[0]]
    second_p = preds[order[1]] if k > 1 else best_p

    vec[INDEX["guess_f1_min"]] = cs.min()
    vec[INDEX["guess_f1_max"]] = cs.max()
    vec[INDEX["guess_f1_second"]] = cs[order[1]] if k > 1 else cs[order[0]]
    vec[INDEX["guess_f1_mean"]] = cs.mean()

    scores = ctx.guess_scores
    weighted = np.array(scores.weighted)
    votes = np.array(scores.unweighted, dtype=float)
    top_w = weighted.max()
    second_w = np.sort(weighted)[-2] if len(weighted) > 1 else top_w
    top_v = votes.max()
    second_v = np.sort(votes)[-2] if len(votes) > 1 else top_v
    vec[INDEX["guess_top_score"]] = top_w / k
    vec[INDEX["guess_score_gap_second"]] = (top_w - second_w) / k
    vec[INDEX["guess_score_gap_mean"]] = (top_w - weighted.mean()) / k
    vec[INDEX["guess_top_votes"]] = top_v / k
    vec[INDEX["guess_votes_gap_second"]] = (top_v - second_v) / k
    vec[INDEX["guess_votes_gap_mean"]] = (top_v - votes.mean()) / k

    ranked = scores.ranked()
    top_region = ctx.features_by_id[ranked[0]]
    second_region = ctx.features_by_id[ranked[1]] if len(ranked) > 1 else top_region
    best_model = ctx.models.get(best_p)
    second_model = ctx.models.get(second_p)
    d_best_top = decide(best_model, top_region)
    d_second_top = decide(second_model, top_region)
    d_best_all = np.array([decide(best_model, r.features) for r in ctx.active_test], dtype=float)
    d_second_all = np.array([decide(second_model, r.features) for r in ctx.active_test], dtype=float)

    vec[INDEX["guess_top2_clf_agree"]] = float(d_best_top == d_second_top)
    vec[INDEX["guess_best_clf_decision"]] = d_best_top
    vec[INDEX["guess_second_clf_decision"]] = d_second_top
    vec[INDEX["guess_best_clf_decision_rel"]] = d_best_top - d_best_all.mean()
    vec[INDEX["guess_second_clf_decision_rel"]] = d_second_top - d_second_all.mean()
    vec[INDEX["guess_best_clf_top2_same"]] = float(
        d_best_top == decide(best_model, second_region)
    )


def _fill_query(vec: np.ndarray, ctx: FeatureContext, predicate: str) -> None:
    model = ctx.models.get(predicate)
    vec[INDEX["query_new_predicate"]] = float(model is None or model.weights is None)
    vec[INDEX["query_predicate_f1"]] = model.f1 if model is not None else 0.0
    used = ctx.stats.used.get(predicate, 0)
    if ctx.stats.dialogs > 0:
        vec[INDEX["query_usage_freq"]] = used / ctx.stats.dialogs
    if used > 0:
        vec[INDEX["query_usage_success"]] = ctx.stats.succeeded.get(predicate, 0) / used
    vec[INDEX["query_opportunistic"]] = float(predicate not in ctx.description_predicates)


def _fill_label_object(
    vec: np.ndarray, ctx: FeatureContext, predicate: str, region_id: str
) -> None:
    model = ctx.models.get(predicate)
    if model is not None and model.weights is not None:
        vec[INDEX["label_margin"]] = margin(model, ctx.features_by_id[region_id])
    avg_dist, unlabeled = density_stats(ctx.density, region_id, model)
    vec[INDEX["label_avg_cos_dist"]] = avg_dist
    vec[INDEX["label_knn_unlabeled"]] = unlabeled
