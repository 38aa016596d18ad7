"""Opportunistic active learning dialog simulator.

An agent plays episodic object-retrieval dialogs: it may query an oracle about
objects in an active training set (yes/no predicate labels, or requests for a
positive example) before guessing which active-test object a description
refers to. Per-predicate linear classifiers ground the description; a softmax
policy over state-action features, trained with REINFORCE, decides when to
query and when to guess.
"""

__version__ = "0.1.0"

from .actions import ExampleQuery, Guess, LabelQuery
from .agent import Agent
from .config import RunConfig, from_dict, load_config
from .corpus import (
    Corpus,
    CorpusSplit,
    Interaction,
    Region,
    SplitConfig,
    SyntheticConfig,
    generate_synthetic,
    load_regions,
    make_splits,
    sample_interaction,
)
from .dialog import Episode, RewardConfig, episode_return
from .features import FeatureContext, N_FEATURES, REGISTRY, featurize, resolve_mask
from .grounding import GuessScores, best_guess, score_objects
from .harness import (
    BatchMetrics,
    Experiment,
    RunResult,
    checkpoint_load,
    checkpoint_save,
    run_ablation,
    run_experiment,
)
from .perception import (
    ClassifierConfig,
    DensityIndex,
    PredicateModel,
    decide,
    estimate_f1,
    extract_predicates,
    margin,
    train_classifier,
)
from .policy import (
    AgentStats,
    PolicyParams,
    action_probabilities,
    grad_log_prob,
    reinforce_update,
    sample_action,
    static_policy_act,
)
from .querygen import (
    BeamConfig,
    TriangularWeights,
    best_object_for_predicate,
    build_beam,
    predicate_weight,
    sample_predicates,
)
from .stats import one_sample_t_test, welch_t_test
