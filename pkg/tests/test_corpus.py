import json

import numpy as np
import pytest
from scipy import stats as sps

from oalsim.corpus import (
    Corpus,
    InteractionSizes,
    SplitConfig,
    SyntheticConfig,
    generate_synthetic,
    load_regions,
    make_splits,
    normalize_annotation,
    sample_interaction,
    write_regions,
)
from oalsim.errors import CorpusError, GenerationError, ParseError, SamplingError, SplitError
from oalsim.seeding import stream


def _write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def _record(rid, d=32, annotations=("red", "box"), description=None):
    return {
        "id": rid,
        "features": [0.1] * d,
        "annotations": list(annotations),
        "description": description,
    }


class TestLoadRegions:
    def test_three_valid_records(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_record(f"r{i}") for i in range(3)])
        regions = load_regions(path)
        assert len(regions) == 3
        assert all(r.features.shape == (32,) for r in regions)

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        recs = [_record("r0"), _record("r1", d=31)]
        _write_jsonl(path, recs)
        with pytest.raises(CorpusError):
            load_regions(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_record("r0"), _record("r0")])
        with pytest.raises(CorpusError):
            load_regions(path)

    def test_malformed_record_names_line(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(_record("r0")) + "\n")
            fh.write("{not json\n")
        with pytest.raises(ParseError, match=":2"):
            load_regions(path)

    def test_annotation_normalization(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_record("r0", annotations=["Red Box!"])])
        (region,) = load_regions(path)
        assert region.annotations == frozenset({"red", "box"})

    def test_description_text_is_extracted(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_record("r0", description="the red box")])
        (region,) = load_regions(path)
        assert region.description_predicates == ("red", "box")

    def test_description_predicate_outside_annotations(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        _write_jsonl(path, [_record("r0", description="the green box")])
        with pytest.raises(CorpusError, match="green"):
            load_regions(path)

    def test_tabular_format(self, tmp_path):
        path = tmp_path / "corpus.csv"
        with open(path, "w") as fh:
            fh.write("id,f0,f1,annotations,description\n")
            fh.write("r0,0.5,-1.0,red|box,the red box\n")
            fh.write("r1,0.25,2.0,ball,\n")
        regions = load_regions(path, fmt="tabular")
        assert [r.id for r in regions] == ["r0", "r1"]
        assert regions[0].description_predicates == ("red", "box")
        assert regions[1].features[1] == 2.0

    def test_unknown_format(self, tmp_path):
        with pytest.raises(CorpusError):
            load_regions(tmp_path / "x", fmt="parquet")


def test_normalize_annotation_strips_and_stems():
    assert normalize_annotation("Red Box!") == ["red", "box"]
    assert normalize_annotation("GLASSES") == ["glass"]
    assert normalize_annotation("tall-cats") == ["tallcat"]


class TestGenerateSynthetic:
    def test_deterministic_given_seed(self, tmp_path):
        cfg = SyntheticConfig(n_regions=40, dim=8, n_predicates=4, seed=7)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_regions(a, generate_synthetic(cfg))
        write_regions(b, generate_synthetic(cfg))
        assert a.read_bytes() == b.read_bytes()

    def test_single_predicate_half_space(self):
        cfg = SyntheticConfig(
            n_regions=30, dim=8, n_predicates=1, coverage=(0.5, 0.5), seed=5
        )
        regions = generate_synthetic(cfg)
        assert all(r.annotations == frozenset({"p00"}) for r in regions)

    def test_too_few_regions(self):
        with pytest.raises(GenerationError):
            generate_synthetic(SyntheticConfig(n_regions=5))

    def test_descriptions_subset_of_annotations(self, small_corpus):
        for r in small_corpus.regions:
            assert set(r.description_predicates) <= set(r.annotations)
            assert 1 <= len(r.description_predicates) <= 3

    def test_annotations_match_half_space_membership(self):
        # regenerating with the same seed must give internally consistent labels
        cfg = SyntheticConfig(n_regions=50, dim=8, n_predicates=4, seed=9)
        regions = generate_synthetic(cfg)
        assert all(r.annotations for r in regions)


class TestMakeSplits:
    def test_full_scale_defaults(self):
        cfg = SplitConfig()
        assert cfg.frequency_threshold == 1000
        assert cfg.classifier_split == 0.6
        assert cfg.test_fraction_of_frequent == 0.5

    def test_no_frequent_predicate(self, small_corpus):
        with pytest.raises(SplitError, match="threshold"):
            make_splits(small_corpus, SplitConfig(frequency_threshold=10_000))

    def test_single_frequent_predicate_routing(self):
        from oalsim.corpus import Region

        rng = np.random.default_rng(0)
        regions = []
        for i in range(12):
            anns = {"freq"} if i < 6 else {f"rare{i}"}
            regions.append(
                Region(id=f"r{i:02d}", features=rng.normal(size=4), annotations=frozenset(anns))
            )
        corpus = Corpus(regions)
        split = make_splits(corpus, SplitConfig(frequency_threshold=6, seed=2))
        assert split.held_out_predicates == frozenset({"freq"})
        test_side = split.policy_test_classifier_train | split.policy_test_classifier_test
        assert test_side == {f"r{i:02d}" for i in range(6)}

    def test_split_audit(self, small_corpus, small_split):
        held = small_split.held_out_predicates
        train_side = (
            small_split.policy_train_classifier_train
            | small_split.policy_train_classifier_test
        )
        test_side = (
            small_split.policy_test_classifier_train
            | small_split.policy_test_classifier_test
        )
        for r in small_corpus.regions:
            if r.annotations & held:
                assert r.id in test_side
            else:
                assert r.id in train_side
        # every policy-test region contains at least one held-out predicate
        for rid in test_side:
            assert small_corpus.by_id[rid].annotations & held

    def test_four_sets_partition(self, small_corpus, small_split):
        sets = [
            small_split.policy_train_classifier_train,
            small_split.policy_train_classifier_test,
            small_split.policy_test_classifier_train,
            small_split.policy_test_classifier_test,
        ]
        union = set()
        total = 0
        for s in sets:
            union |= s
            total += len(s)
        assert union == set(small_corpus.ids)
        assert total == len(small_corpus)

    def test_deterministic(self, small_corpus):
        cfg = SplitConfig(frequency_threshold=30, seed=1)
        assert make_splits(small_corpus, cfg) == make_splits(small_corpus, cfg)


class TestSampleInteraction:
    def test_shapes_and_membership(self, small_corpus, small_split):
        rng = stream(0, "t")
        inter = sample_interaction(
            small_corpus, small_split, "policy-train", InteractionSizes(), rng
        )
        assert len(inter.active_train) == 8
        assert len(inter.active_test) == 4
        assert inter.target in inter.active_test
        assert not (set(inter.active_train) & set(inter.active_test))
        assert inter.description_predicates

    def test_exact_sets_when_pool_is_exact(self, small_corpus):
        from oalsim.corpus import CorpusSplit

        ids = small_corpus.ids
        split = CorpusSplit(
            policy_train_classifier_train=frozenset(ids[:8]),
            policy_train_classifier_test=frozenset(ids[8:12]),
            policy_test_classifier_train=frozenset(ids[12:20]),
            policy_test_classifier_test=frozenset(ids[20:24]),
            held_out_predicates=frozenset(),
        )
        inter = sample_interaction(
            small_corpus, split, "policy-train", InteractionSizes(), stream(1, "t")
        )
        assert set(inter.active_train) == set(ids[:8])
        assert set(inter.active_test) == set(ids[8:12])

    def test_subset_too_small(self, small_corpus):
        from oalsim.corpus import CorpusSplit

        ids = small_corpus.ids
        split = CorpusSplit(
            policy_train_classifier_train=frozenset(ids[:4]),
            policy_train_classifier_test=frozenset(ids[4:8]),
            policy_test_classifier_train=frozenset(ids[8:16]),
            policy_test_classifier_test=frozenset(ids[16:20]),
            held_out_predicates=frozenset(),
        )
        with pytest.raises(SamplingError):
            sample_interaction(
                small_corpus, split, "policy-train", InteractionSizes(), stream(2, "t")
            )

    def test_target_uniform_over_classifier_test(self, small_corpus, small_split):
        rng = stream(3, "uniform")
        pool = sorted(small_split.policy_train_classifier_test)
        counts = {rid: 0 for rid in pool}
        n = 10_000
        for _ in range(n):
            inter = sample_interaction(
                small_corpus, small_split, "policy-train", InteractionSizes(), rng
            )
            counts[inter.target] += 1
        observed = [counts[rid] for rid in pool]
        _, p = sps.chisquare(observed)
        assert p > 0.001

    def test_deterministic_stream(self, small_corpus, small_split):
        def draw_five(seed):
            rng = stream(seed, "s")
            return [
                sample_interaction(
                    small_corpus, small_split, "policy-train", InteractionSizes(), rng
                )
                for _ in range(5)
            ]

        assert draw_five(9) == draw_five(9)
        assert draw_five(9) != draw_five(10)
