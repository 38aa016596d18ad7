import numpy as np
import pytest

from oalsim.config import CorpusSource, ExperimentConfig, PolicyConfig, RunConfig
from oalsim.corpus import Corpus, SplitConfig, SyntheticConfig, generate_synthetic, make_splits
from oalsim.perception import DensityIndex


SMALL_SYNTH = SyntheticConfig(
    n_regions=120, dim=16, n_predicates=8, coverage=(0.15, 0.40), seed=3
)


def small_run_config(**experiment_overrides) -> RunConfig:
    exp = dict(
        init_batches=2, train_batches=2, test_batches=2, batch_size=15, master_seed=11
    )
    exp.update(experiment_overrides)
    return RunConfig(
        corpus=CorpusSource(synthetic=SMALL_SYNTH),
        split=SplitConfig(frequency_threshold=30, seed=1),
        policy=PolicyConfig(learning_rate=3e-6),
        experiment=ExperimentConfig(**exp),
    )


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return Corpus(generate_synthetic(SMALL_SYNTH))


@pytest.fixture(scope="session")
def small_split(small_corpus):
    return make_splits(small_corpus, SplitConfig(frequency_threshold=30, seed=1))


@pytest.fixture(scope="session")
def small_density(small_corpus):
    feats = np.stack([r.features for r in small_corpus.regions])
    return DensityIndex(small_corpus.ids, feats, k=10)
