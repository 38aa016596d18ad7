"""Three-phase experiment protocol, batch execution, metrics, and checkpoints.

Protocol: an initialization phase runs the static policy on the policy-train
side while REINFORCE updates bootstrap the weights from its trajectories; a
training phase resets the agent's classifiers/stats and lets the learned
policy act and update; a testing phase freezes the weights, resets the agent
again, and runs on the policy-test side (classifiers still learn from queried
labels there, the policy does not).

All randomness is derived from the master seed by (phase, batch, episode,
purpose) paths, so interaction sequences are identical across policy and
ablation conditions, and resuming from a checkpoint is bit-exact.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent import Agent
from .config import RunConfig
from .corpus import (
    Corpus,
    CorpusSplit,
    Interaction,
    generate_synthetic,
    load_regions,
    make_splits,
    sample_interaction,
)
from .dialog import Episode, episode_return, transcript_records
from .errors import CheckpointError
from .features import FeatureContext, N_FEATURES, featurize, resolve_mask
from .grounding import best_guess, score_objects
from .perception import DensityIndex, PredicateModel, estimate_f1, train_classifier
from .policy import (
    PolicyParams,
    action_probabilities,
    reinforce_update,
    sample_action,
    static_policy_act,
)
from .querygen import build_beam
from .seeding import stream
from .stats import welch_t_test

CHECKPOINT_VERSION = "oalsim-checkpoint/1"

PHASE_NAMES = ("init", "train", "test")


@dataclass
class BatchMetrics:
    phase: str
    batch: int
    success_rate: float
    mean_length: float
    mean_queries: float
    label_counts: dict[str, int]
    success_indicators: list[int]
    lengths: list[int]

    def row(self) -> list:
        return [
            self.phase,
            self.batch,
            repr(self.success_rate),
            repr(self.mean_length),
            repr(self.mean_queries),
        ]


@dataclass
class EpisodeOutcome:
    interaction: Interaction
    success: bool
    length: int
    n_queries: int
    steps: list[tuple[np.ndarray, int, float]]
    pending: list[tuple[str, str, int]]


@dataclass(frozen=True)
class PhasePlan:
    name: str
    side: str
    policy_kind: str
    update_policy: bool
    n_batches: int
    reset_agent: bool


@dataclass
class RunResult:
    config: RunConfig
    corpus_fingerprint: str
    metrics: list[BatchMetrics]
    theta: np.ndarray

    def final_test_batch(self) -> BatchMetrics:
        return self.metrics[-1]

    def summary(self) -> dict:
        final = self.final_test_batch()
        return {
            "master_seed": self.config.experiment.master_seed,
            "policy_kind": self.config.experiment.policy_kind,
            "ablate": list(self.config.experiment.ablate),
            "corpus_fingerprint": self.corpus_fingerprint,
            "final_test_batch": {
                "success_rate": final.success_rate,
                "mean_length": final.mean_length,
                "mean_queries": final.mean_queries,
                "success_indicators": final.success_indicators,
                "lengths": final.lengths,
            },
            "batches": [
                {
                    "phase": m.phase,
                    "batch": m.batch,
                    "success_rate": m.success_rate,
                    "mean_length": m.mean_length,
                    "mean_queries": m.mean_queries,
                }
                for m in self.metrics
            ],
        }


def build_corpus(config: RunConfig) -> Corpus:
    src = config.corpus
    if src.synthetic is not None:
        return Corpus(generate_synthetic(src.synthetic))
    return Corpus(load_regions(src.path, src.format))


class Experiment:
    """One full run against one corpus/split; reusable across conditions."""

    def __init__(
        self,
        config: RunConfig,
        corpus: Corpus | None = None,
        split: CorpusSplit | None = None,
        density: DensityIndex | None = None,
    ):
        self.config = config
        self.corpus = corpus if corpus is not None else build_corpus(config)
        self.split = split if split is not None else make_splits(self.corpus, config.split)
        feats = np.stack([r.features for r in self.corpus.regions])
        self.density = (
            density
            if density is not None
            else DensityIndex(
                self.corpus.ids,
                feats,
                k=config.classifier.knn_k,
                avg_sample=config.classifier.density_avg_sample,
            )
        )
        self.features_by_id = self.corpus.feature_map()
        mask = resolve_mask(config.experiment.ablate)
        self.mask = mask if mask.any() else None
        self.master = config.experiment.master_seed

    # -- phase plan ---------------------------------------------------------

    def phase_plan(self) -> list[PhasePlan]:
        exp = self.config.experiment
        kind = exp.policy_kind
        return [
            PhasePlan("init", "policy-train", "static", True, exp.init_batches, False),
            PhasePlan("train", "policy-train", kind, kind == "learned", exp.train_batches, True),
            PhasePlan("test", "policy-test", kind, False, exp.test_batches, True),
        ]

    # -- episode ------------------------------------------------------------

    def run_episode(
        self,
        interaction: Interaction,
        agent: Agent,
        theta: np.ndarray,
        policy_kind: str,
        phase_idx: int,
        batch_idx: int,
        ep_idx: int,
    ) -> tuple[EpisodeOutcome, Episode]:
        cfg = self.config
        desc = interaction.description_predicates
        episode_predicates = sorted(set(agent.predicates) | set(desc))
        active_test = [self.corpus.by_id[rid] for rid in interaction.active_test]

        oracle_rng = stream(self.master, "oracle", phase_idx, batch_idx, ep_idx)
        beam_rng = stream(self.master, "beam", phase_idx, batch_idx, ep_idx)
        policy_rng = stream(self.master, "policy", phase_idx, batch_idx, ep_idx)

        models = dict(agent.models)  # shallow view; replaced per-predicate if immediate
        immediate = cfg.episode.immediate_updates
        current_scores = {}

        episode = Episode(
            interaction=interaction,
            regions=self.corpus.by_id,
            base_labels=agent.base_labels(),
            rewards=cfg.rewards,
            t_max=cfg.episode.t_max,
            oracle_rng=oracle_rng,
            guesser=lambda: best_guess(current_scores["now"]),
        )

        steps: list[tuple[np.ndarray, int, float]] = []
        while not episode.terminated:
            beam = build_beam(
                turn=episode.turn,
                t_max=cfg.episode.t_max,
                predicates=episode_predicates,
                models=models,
                active_train=interaction.active_train,
                features=self.features_by_id,
                labeled_pairs=episode.labeled_pairs,
                asked_examples=episode.asked_examples,
                params=cfg.triangular,
                cfg=cfg.beam,
                rng=beam_rng,
            )
            current_scores["now"] = score_objects(desc, models, active_test)
            ctx = FeatureContext(
                turn=episode.turn,
                t_max=cfg.episode.t_max,
                description_predicates=desc,
                models=models,
                stats=agent.stats,
                density=self.density,
                guess_scores=current_scores["now"],
                active_test=active_test,
                features_by_id=self.features_by_id,
                mask=self.mask,
            )
            beam_features = np.stack([featurize(a, ctx) for a in beam])
            if policy_kind == "static":
                chosen = static_policy_act(
                    episode.turn, beam, cfg.policy.static_n_queries, policy_rng
                )
            else:
                probs = action_probabilities(theta, beam_features)
                chosen = sample_action(probs, policy_rng)
            n_before = len(episode.pending_labels)
            reward, _ = episode.step(beam[chosen], beam_features, chosen)
            steps.append((beam_features, chosen, reward))
            if immediate and len(episode.pending_labels) > n_before:
                models = self._refresh_models(
                    models, episode.pending_labels[n_before:], agent
                )

        outcome = EpisodeOutcome(
            interaction=interaction,
            success=episode.success,
            length=episode.length(),
            n_queries=episode.n_queries(),
            steps=steps,
            pending=list(episode.pending_labels),
        )
        return outcome, episode

    def _refresh_models(
        self,
        models: dict[str, PredicateModel],
        new_labels: Sequence[tuple[str, str, int]],
        agent: Agent,
    ) -> dict[str, PredicateModel]:
        """Immediate-update variant: retrain affected classifiers mid-episode."""
        out = dict(models)
        touched = set()
        for p, rid, label in new_labels:
            model = out.get(p)
            if model is None:
                model = PredicateModel(predicate=p)
            elif model is agent.models.get(p):
                model = model.clone()
            model.record_label(rid, label)
            out[p] = model
            touched.add(p)
        for p in touched:
            train_classifier(out[p], self.features_by_id, self.config.classifier)
            out[p].f1 = estimate_f1(out[p], self.features_by_id, self.config.classifier)
        return out

    # -- batch ----------------------------------------------------------------

    def run_batch(
        self,
        plan: PhasePlan,
        phase_idx: int,
        batch_idx: int,
        agent: Agent,
        theta: np.ndarray,
        transcript_sink=None,
    ) -> tuple[BatchMetrics, dict[tuple[str, str], int], list[EpisodeOutcome]]:
        cfg = self.config
        outcomes: list[EpisodeOutcome] = []
        merged: dict[tuple[str, str], int] = {}
        base = agent.base_labels()
        for ep_idx in range(cfg.experiment.batch_size):
            rng = stream(self.master, "interaction", phase_idx, batch_idx, ep_idx)
            interaction = sample_interaction(
                self.corpus, self.split, plan.side, cfg.episode.sizes(), rng
            )
            outcome, episode = self.run_episode(
                interaction, agent, theta, plan.policy_kind, phase_idx, batch_idx, ep_idx
            )
            agent.predicates.update(interaction.description_predicates)
            for p, rid, label in outcome.pending:
                if rid not in base.get(p, {}):
                    merged[(p, rid)] = label
            outcomes.append(outcome)
            if transcript_sink is not None:
                episode_id = f"{plan.name}/{batch_idx}/{ep_idx}"
                for rec in transcript_records(episode_id, episode):
                    transcript_sink.write(json.dumps(rec) + "\n")

        label_counts: dict[str, int] = {}
        for (p, _rid) in merged:
            label_counts[p] = label_counts.get(p, 0) + 1
        indicators = [1 if o.success else 0 for o in outcomes]
        lengths = [o.length for o in outcomes]
        metrics = BatchMetrics(
            phase=plan.name,
            batch=batch_idx,
            success_rate=sum(indicators) / len(indicators),
            mean_length=sum(lengths) / len(lengths),
            mean_queries=sum(o.n_queries for o in outcomes) / len(outcomes),
            label_counts=label_counts,
            success_indicators=indicators,
            lengths=lengths,
        )
        return metrics, merged, outcomes

    def apply_batch_end(
        self,
        agent: Agent,
        merged: dict[tuple[str, str], int],
        outcomes: list[EpisodeOutcome],
    ) -> None:
        """Fold queued labels into classifiers, retrain, refresh stats."""
        dirty = set()
        for (p, rid), label in merged.items():
            model = agent.models.setdefault(p, PredicateModel(predicate=p))
            if model.record_label(rid, label):
                dirty.add(p)
        for p in sorted(dirty):
            model = agent.models[p]
            train_classifier(model, self.features_by_id, self.config.classifier)
            model.f1 = estimate_f1(model, self.features_by_id, self.config.classifier)
        for o in outcomes:
            agent.stats.observe_dialog(o.interaction.description_predicates, o.success)

    def policy_update(
        self,
        params: PolicyParams,
        theta: np.ndarray,
        outcomes: list[EpisodeOutcome],
        update_index: int,
    ) -> np.ndarray:
        gamma = self.config.rewards.discount
        batch = []
        first_returns = []
        for o in outcomes:
            returns = episode_return([r for (_, _, r) in o.steps], gamma)
            batch.append(
                [(feats, chosen, g) for (feats, chosen, _), g in zip(o.steps, returns)]
            )
            first_returns.append(returns[0])
        params.observe_returns(first_returns)
        return reinforce_update(
            theta, batch, params.alpha_at(update_index), params.baseline()
        )

    # -- full run ---------------------------------------------------------------

    def run(
        self,
        resume: dict | None = None,
        checkpoint_dir=None,
        transcript_path=None,
    ) -> RunResult:
        cfg = self.config
        agent = Agent()
        params = PolicyParams(
            theta=np.zeros(N_FEATURES),
            alpha=cfg.policy.learning_rate,
            alpha_decay=cfg.policy.learning_rate_decay,
            use_baseline=cfg.policy.use_baseline,
        )
        theta = params.theta
        metrics: list[BatchMetrics] = []
        update_counter = 0
        start_phase, start_batch = 0, 0

        if resume is not None:
            state = self._validate_checkpoint(resume)
            agent = Agent.from_dict(state["agent"])
            theta = np.asarray(state["theta"])
            params.baseline_mean = state["baseline_mean"]
            params.baseline_count = state["baseline_count"]
            update_counter = state["update_counter"]
            start_phase, start_batch = state["cursor"]
            metrics = [
                BatchMetrics(**row) for row in state["metrics"]
            ]

        sink = open(transcript_path, "w", encoding="utf-8") if transcript_path else None
        try:
            plans = self.phase_plan()
            for phase_idx in range(start_phase, len(plans)):
                plan = plans[phase_idx]
                first_batch = start_batch if phase_idx == start_phase else 0
                if first_batch == 0 and plan.reset_agent:
                    agent.reset()
                for batch_idx in range(first_batch, plan.n_batches):
                    batch_metrics, merged, outcomes = self.run_batch(
                        plan, phase_idx, batch_idx, agent, theta, transcript_sink=sink
                    )
                    self.apply_batch_end(agent, merged, outcomes)
                    if plan.update_policy:
                        theta = self.policy_update(params, theta, outcomes, update_counter)
                        update_counter += 1
                    metrics.append(batch_metrics)
                    if checkpoint_dir is not None:
                        cursor = (
                            (phase_idx, batch_idx + 1)
                            if batch_idx + 1 < plan.n_batches
                            else (phase_idx + 1, 0)
                        )
                        checkpoint_save(
                            Path(checkpoint_dir)
                            / f"checkpoint_p{phase_idx}_b{batch_idx}.json",
                            self._checkpoint_state(
                                agent, theta, params, update_counter, cursor, metrics
                            ),
                        )
        finally:
            if sink is not None:
                sink.close()

        return RunResult(
            config=cfg,
            corpus_fingerprint=self.corpus.fingerprint(),
            metrics=metrics,
            theta=theta,
        )

    # -- checkpoints --------------------------------------------------------------

    def _checkpoint_state(
        self,
        agent: Agent,
        theta: np.ndarray,
        params: PolicyParams,
        update_counter: int,
        cursor: tuple[int, int],
        metrics: list[BatchMetrics],
    ) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config_digest": self.config.digest(),
            "master_seed": self.master,
            "cursor": list(cursor),
            "theta": [float(v) for v in theta],
            "baseline_mean": params.baseline_mean,
            "baseline_count": params.baseline_count,
            "update_counter": update_counter,
            "agent": agent.to_dict(),
            "metrics": [dataclasses.asdict(m) for m in metrics],
        }

    def _validate_checkpoint(self, state: dict) -> dict:
        if state.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {state.get('version')!r} != {CHECKPOINT_VERSION!r}"
            )
        if state.get("config_digest") != self.config.digest():
            raise CheckpointError("checkpoint was written under a different config")
        state["cursor"] = tuple(state["cursor"])
        return state


def checkpoint_save(path, state: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state, fh)


def checkpoint_load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            state = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}") from exc
    if not isinstance(state, dict) or "version" not in state:
        raise CheckpointError(f"checkpoint {path} is missing its version tag")
    return state


def run_experiment(
    config: RunConfig,
    corpus: Corpus | None = None,
    split: CorpusSplit | None = None,
    density: DensityIndex | None = None,
    **run_kwargs,
) -> RunResult:
    return Experiment(config, corpus=corpus, split=split, density=density).run(**run_kwargs)


# -- metrics / summary files ------------------------------------------------------

CSV_HEADER = ["phase", "batch", "success_rate", "mean_length", "mean_queries"]


def write_metrics_csv(path, metrics: Sequence[BatchMetrics]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for m in metrics:
            writer.writerow(m.row())


def write_summary(path, result: RunResult) -> None:
    summary = result.summary()
    summary["config"] = result.config.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


# -- ablation ---------------------------------------------------------------------


@dataclass
class AblationResult:
    conditions: dict[str, RunResult] = field(default_factory=dict)

    def comparison_rows(self) -> list[dict]:
        """Final-test-batch metrics per condition with Welch p vs static and full."""
        static = self.conditions["static"].final_test_batch()
        full = self.conditions["full"].final_test_batch()
        rows = []
        for name, result in self.conditions.items():
            final = result.final_test_batch()
            row = {
                "condition": name,
                "success_rate": final.success_rate,
                "mean_length": final.mean_length,
            }
            for label, ref in (("static", static), ("full", full)):
                if result.final_test_batch() is ref:
                    row[f"p_success_vs_{label}"] = None
                    row[f"p_length_vs_{label}"] = None
                    continue
                row[f"p_success_vs_{label}"] = welch_t_test(
                    final.success_indicators, ref.success_indicators
                ).p_two_sided
                row[f"p_length_vs_{label}"] = welch_t_test(
                    [float(v) for v in final.lengths], [float(v) for v in ref.lengths]
                ).p_two_sided
            rows.append(row)
        return rows


def run_ablation(config: RunConfig, names: Sequence[str]) -> AblationResult:
    """Rerun the experiment per ablated feature/group, plus full and static arms."""
    for name in names:
        resolve_mask([name])  # fail fast on unknown names
    corpus = build_corpus(config)
    split = make_splits(corpus, config.split)
    feats = np.stack([r.features for r in corpus.regions])
    density = DensityIndex(
        corpus.ids,
        feats,
        k=config.classifier.knn_k,
        avg_sample=config.classifier.density_avg_sample,
    )

    def variant(**exp_overrides) -> RunConfig:
        experiment = dataclasses.replace(config.experiment, **exp_overrides)
        return dataclasses.replace(config, experiment=experiment)

    result = AblationResult()
    result.conditions["full"] = Experiment(
        variant(policy_kind="learned", ablate=()), corpus, split, density
    ).run()
    result.conditions["static"] = Experiment(
        variant(policy_kind="static", ablate=()), corpus, split, density
    ).run()
    for name in names:
        result.conditions[name] = Experiment(
            variant(policy_kind="learned", ablate=(name,)), corpus, split, density
        ).run()
    return result
