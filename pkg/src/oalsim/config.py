"""Declarative run configuration with a strict schema.

A run is described by one JSON document (or the equivalent CLI flags). Unknown
keys are errors, so typos in ablation names or section keys fail before any
computation. Precedence is flags > config file > defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .corpus import InteractionSizes, SplitConfig, SyntheticConfig
from .dialog import RewardConfig
from .errors import ConfigError, DataError
from .perception import ClassifierConfig
from .querygen import BeamConfig, TriangularWeights

POLICY_KINDS = ("learned", "static")


@dataclass(frozen=True)
class CorpusSource:
    path: str | None = None
    format: str = "annotation-json"
    synthetic: SyntheticConfig | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ConfigError("corpus source needs exactly one of 'path' or 'synthetic'")


@dataclass(frozen=True)
class PolicyConfig:
    learning_rate: float = 1e-3
    learning_rate_decay: float = 0.0
    use_baseline: bool = False
    static_n_queries: int = 15

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.static_n_queries < 0:
            raise ConfigError("static_n_queries must be >= 0")


@dataclass(frozen=True)
class EpisodeConfig:
    t_max: int = 40
    active_train_size: int = 8
    active_test_size: int = 4
    immediate_updates: bool = False

    def __post_init__(self):
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")

    def sizes(self) -> InteractionSizes:
        return InteractionSizes(self.active_train_size, self.active_test_size)


@dataclass(frozen=True)
class ExperimentConfig:
    init_batches: int = 10
    train_batches: int = 10
    test_batches: int = 10
    batch_size: int = 100
    master_seed: int = 0
    policy_kind: str = "learned"
    ablate: tuple[str, ...] = ()
    checkpoints: bool = False

    def __post_init__(self):
        for name in ("init_batches", "train_batches", "test_batches", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.policy_kind not in POLICY_KINDS:
            raise ConfigError(f"policy_kind must be one of {POLICY_KINDS}")


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusSource
    split: SplitConfig = field(default_factory=SplitConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    triangular: TriangularWeights = field(default_factory=TriangularWeights)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["experiment"]["ablate"] = list(self.experiment.ablate)
        return out

    def digest(self) -> str:
        """Hash of the behavior-defining config; output options are excluded."""
        data = self.to_dict()
        data["experiment"].pop("checkpoints", None)
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def _build(cls, data: dict, where: str, coercions: dict | None = None):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = dict(data)
    for key, fn in (coercions or {}).items():
        if key in kwargs:
            kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, DataError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    known = {
        "corpus", "split", "rewards", "beam", "triangular",
        "classifier", "policy", "episode", "experiment",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"config: unknown sections {sorted(unknown)}")
    if "corpus" not in data:
        raise ConfigError("config: missing 'corpus' section")

    corpus_data = dict(data["corpus"])
    synthetic = None
    if "synthetic" in corpus_data:
        synthetic = _build(
            SyntheticConfig,
            dict(corpus_data.pop("synthetic")),
            "corpus.synthetic",
            coercions={
                "coverage": lambda v: tuple(float(x) for x in v),
                "description_length": lambda v: tuple(int(x) for x in v),
            },
        )
    corpus = _build(
        CorpusSource,
        {**corpus_data, "synthetic": synthetic},
        "corpus",
    )

    def section(name, cls, coercions=None):
        return _build(cls, dict(data.get(name, {})), name, coercions)

    return RunConfig(
        corpus=corpus,
        split=section("split", SplitConfig),
        rewards=section("rewards", RewardConfig),
        beam=section("beam", BeamConfig),
        triangular=section("triangular", TriangularWeights),
        classifier=section("classifier", ClassifierConfig),
        policy=section("policy", PolicyConfig),
        episode=section("episode", EpisodeConfig),
        experiment=section(
            "experiment", ExperimentConfig, coercions={"ablate": tuple}
        ),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(data)
