"""Region data model, ingestion, synthetic generation, and split construction.

A corpus is a list of regions, each carrying a fixed-dimension feature vector,
a set of normalized predicate annotations, and an optional description. The
four-way split (policy-train/policy-test x classifier-train/classifier-test)
routes every region containing a held-out frequent predicate to the policy-test
side, so test-time descriptions always involve at least one novel predicate.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CorpusError, GenerationError, ParseError, SamplingError, SplitError
from .perception import extract_predicates, normalize_token
from .seeding import stream


@dataclass(frozen=True)
class Region:
    """One candidate object: features, ground-truth predicates, optional description."""

    id: str
    features: np.ndarray
    annotations: frozenset[str]
    description: str | None = None
    description_predicates: tuple[str, ...] = ()

    def describable(self) -> bool:
        return len(self.description_predicates) > 0


class Corpus:
    """Immutable collection of regions with id lookup and a shared feature dim."""

    def __init__(self, regions: list[Region]):
        if not regions:
            raise CorpusError("corpus is empty")
        self.regions = list(regions)
        self.dim = int(regions[0].features.shape[0])
        self.by_id: dict[str, Region] = {}
        for r in self.regions:
            if r.features.shape != (self.dim,):
                raise CorpusError(
                    f"region {r.id!r}: feature dimension {r.features.shape[0]} != {self.dim}"
                )
            if r.id in self.by_id:
                raise CorpusError(f"duplicate region id {r.id!r}")
            self.by_id[r.id] = r
        self.ids = [r.id for r in self.regions]

    def __len__(self) -> int:
        return len(self.regions)

    def features_of(self, region_id: str) -> np.ndarray:
        return self.by_id[region_id].features

    def feature_map(self) -> dict[str, np.ndarray]:
        return {r.id: r.features for r in self.regions}

    def predicates(self) -> set[str]:
        out: set[str] = set()
        for r in self.regions:
            out |= r.annotations
        return out

    def fingerprint(self) -> str:
        """Content hash over ids, features, annotations, and descriptions."""
        h = hashlib.sha256()
        for r in self.regions:
            h.update(r.id.encode())
            h.update(np.ascontiguousarray(r.features, dtype=np.float64).tobytes())
            h.update("|".join(sorted(r.annotations)).encode())
            h.update(("#" + ",".join(r.description_predicates)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class CorpusSplit:
    """Four disjoint region-id sets plus the held-out predicate set."""

    policy_train_classifier_train: frozenset[str]
    policy_train_classifier_test: frozenset[str]
    policy_test_classifier_train: frozenset[str]
    policy_test_classifier_test: frozenset[str]
    held_out_predicates: frozenset[str]

    def side(self, name: str) -> tuple[frozenset[str], frozenset[str]]:
        if name == "policy-train":
            return self.policy_train_classifier_train, self.policy_train_classifier_test
        if name == "policy-test":
            return self.policy_test_classifier_train, self.policy_test_classifier_test
        raise ValueError(f"unknown split side {name!r}")


@dataclass(frozen=True)
class Interaction:
    """One dialog's worth of regions: 8 queryable, 4 guessable, one target."""

    active_train: tuple[str, ...]
    active_test: tuple[str, ...]
    target: str
    description_predicates: tuple[str, ...]


def normalize_annotation(text: str) -> list[str]:
    """Annotation string -> normalized predicate tokens (lower, strip specials, stem)."""
    cleaned = "".join(c if (c.isalnum() or c.isspace()) else "" for c in text.lower())
    return [normalize_token(tok) for tok in cleaned.split() if normalize_token(tok)]


def _region_from_record(
    rid: str,
    features: list,
    annotations: list,
    description,
    where: str,
) -> Region:
    try:
        feats = np.asarray([float(v) for v in features], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad feature value ({exc})") from exc
    preds: set[str] = set()
    for ann in annotations:
        preds.update(normalize_annotation(str(ann)))
    desc_text: str | None = None
    desc_preds: tuple[str, ...] = ()
    if description is not None and description != "":
        if isinstance(description, str):
            desc_text = description
            desc_preds = tuple(extract_predicates(description))
        else:
            toks = []
            for tok in description:
                toks.extend(normalize_annotation(str(tok)))
            desc_preds = tuple(dict.fromkeys(toks))
            desc_text = " ".join(desc_preds)
    for p in desc_preds:
        if p not in preds:
            raise CorpusError(
                f"{where}: description predicate {p!r} missing from annotations"
            )
    return Region(
        id=str(rid),
        features=feats,
        annotations=frozenset(preds),
        description=desc_text,
        description_predicates=desc_preds,
    )


def load_regions(path, fmt: str = "annotation-json") -> list[Region]:
    """Read a region file. Formats: annotation-json (JSONL) or tabular (CSV)."""
    if fmt == "annotation-json":
        regions = _load_jsonl(path)
    elif fmt == "tabular":
        regions = _load_tabular(path)
    else:
        raise CorpusError(f"unknown corpus format {fmt!r}")
    _validate_regions(regions)
    return regions


def _load_jsonl(path) -> list[Region]:
    regions = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ParseError(f"{path}:{lineno}: record is not an object")
            for key in ("id", "features", "annotations"):
                if key not in rec:
                    raise ParseError(f"{path}:{lineno}: missing field {key!r}")
            regions.append(
                _region_from_record(
                    rec["id"],
                    rec["features"],
                    rec["annotations"],
                    rec.get("description"),
                    f"{path}:{lineno}",
                )
            )
    return regions


def _load_tabular(path) -> list[Region]:
    regions = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        feat_cols = [i for i, name in enumerate(header) if name.startswith("f")]
        try:
            id_col = header.index("id")
            ann_col = header.index("annotations")
        except ValueError as exc:
            raise ParseError(f"{path}: header missing required column ({exc})") from exc
        desc_col = header.index("description") if "description" in header else None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            annotations = [a for a in row[ann_col].split("|") if a]
            description = row[desc_col] if desc_col is not None and row[desc_col] else None
            regions.append(
                _region_from_record(
                    row[id_col],
                    [row[i] for i in feat_cols],
                    annotations,
                    description,
                    f"{path}:{lineno}",
                )
            )
    return regions


def _validate_regions(regions: list[Region]) -> None:
    if not regions:
        raise CorpusError("no regions in file")
    dim = regions[0].features.shape[0]
    seen: set[str] = set()
    for r in regions:
        if r.features.shape[0] != dim:
            raise CorpusError(
                f"region {r.id!r}: feature dimension {r.features.shape[0]} != {dim}"
            )
        if r.id in seen:
            raise CorpusError(f"duplicate region id {r.id!r}")
        seen.add(r.id)


def write_regions(path, regions: list[Region]) -> None:
    """Write regions as JSONL, the same schema load_regions ingests."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in regions:
            rec = {
                "id": r.id,
                "features": [float(v) for v in r.features],
                "annotations": sorted(r.annotations),
                "description": list(r.description_predicates) or None,
            }
            fh.write(json.dumps(rec) + "\n")


@dataclass(frozen=True)
class SyntheticConfig:
    n_regions: int = 600
    dim: int = 32
    n_predicates: int = 24
    coverage: tuple[float, float] = (0.08, 0.30)
    description_length: tuple[int, int] = (1, 3)
    seed: int = 13
    max_resamples: int = 1000


def generate_synthetic(cfg: SyntheticConfig) -> list[Region]:
    """Half-space predicates over Gaussian features; annotations are exact memberships.

    Each predicate is a random unit normal u and offset b; a region is annotated
    with it iff u.x >= b. Offsets are chosen so each predicate covers a fraction
    of feature space drawn from cfg.coverage. Regions with no annotations are
    resampled (bounded), so every region can serve as a target.
    """
    if cfg.n_regions < 12:
        raise GenerationError(
            f"n_regions={cfg.n_regions} is below one interaction's worth (12)"
        )
    if cfg.n_predicates < 1:
        raise GenerationError(f"n_predicates={cfg.n_predicates} < 1")
    lo, hi = cfg.coverage
    if not (0.0 < lo <= hi < 1.0):
        raise GenerationError(f"coverage bounds {cfg.coverage} not in (0,1)")
    dlo, dhi = cfg.description_length
    if not (1 <= dlo <= dhi):
        raise GenerationError(f"description length range {cfg.description_length} invalid")

    rng = stream(cfg.seed, "synthetic")
    names = [f"p{i:02d}" for i in range(cfg.n_predicates)]
    normals = rng.normal(size=(cfg.n_predicates, cfg.dim))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    # u.x ~ N(0,1) for unit u, so offset = isf(coverage) hits the target rate.
    coverages = rng.uniform(lo, hi, size=cfg.n_predicates)
    offsets = np.array([_normal_isf(c) for c in coverages])

    regions = []
    for i in range(cfg.n_regions):
        for attempt in range(cfg.max_resamples):
            x = rng.normal(size=cfg.dim)
            mask = normals @ x >= offsets
            if mask.any():
                break
        else:
            raise GenerationError(
                f"region {i}: no non-empty annotation set after {cfg.max_resamples} resamples"
            )
        anns = [names[j] for j in range(cfg.n_predicates) if mask[j]]
        k_lo = min(dlo, len(anns))
        k_hi = min(dhi, len(anns))
        k = int(rng.integers(k_lo, k_hi + 1))
        desc = tuple(sorted(rng.choice(len(anns), size=k, replace=False).tolist()))
        desc_preds = tuple(anns[j] for j in desc)
        regions.append(
            Region(
                id=f"r{i:04d}",
                features=x,
                annotations=frozenset(anns),
                description=" ".join(desc_preds),
                description_predicates=desc_preds,
            )
        )
    return regions


def _normal_isf(p: float) -> float:
    """Inverse survival function of the standard normal (Acklam's rational fit)."""
    return -_normal_ppf(p)


def _normal_ppf(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0,1)")
    # Peter Acklam's approximation, |relative error| < 1.15e-9.
    a = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
    b = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01]
    c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
    d = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00]
    plow, phigh = 0.02425, 1 - 0.02425
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if p > phigh:
        q = math.sqrt(-2 * math.log(1 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)


@dataclass(frozen=True)
class SplitConfig:
    frequency_threshold: int = 1000
    test_fraction_of_frequent: float = 0.5
    classifier_split: float = 0.6
    seed: int = 0


def make_splits(corpus: Corpus, cfg: SplitConfig) -> CorpusSplit:
    """Hold out a random share of frequent predicates; route their regions to policy-test."""
    if not (0.0 < cfg.test_fraction_of_frequent < 1.0):
        raise SplitError(f"test_fraction_of_frequent {cfg.test_fraction_of_frequent} not in (0,1)")
    if not (0.0 < cfg.classifier_split < 1.0):
        raise SplitError(f"classifier_split {cfg.classifier_split} not in (0,1)")

    counts: dict[str, int] = {}
    for r in corpus.regions:
        for p in r.annotations:
            counts[p] = counts.get(p, 0) + 1
    frequent = sorted(p for p, n in counts.items() if n >= cfg.frequency_threshold)
    if not frequent:
        raise SplitError(
            f"no predicate appears in >= {cfg.frequency_threshold} regions; "
            "lower the frequency threshold"
        )
    rng = stream(cfg.seed, "split", "held-out")
    n_held = max(1, int(math.floor(cfg.test_fraction_of_frequent * len(frequent) + 0.5)))
    held = frozenset(
        frequent[i] for i in sorted(rng.choice(len(frequent), size=n_held, replace=False))
    )

    test_side = [r.id for r in corpus.regions if r.annotations & held]
    train_side = [r.id for r in corpus.regions if not (r.annotations & held)]

    def split_side(ids: list[str], label: str) -> tuple[frozenset[str], frozenset[str]]:
        order = list(ids)
        stream(cfg.seed, "split", label).shuffle(order)
        cut = int(round(cfg.classifier_split * len(order)))
        return frozenset(order[:cut]), frozenset(order[cut:])

    tr_ct, tr_cx = split_side(train_side, "policy-train")
    te_ct, te_cx = split_side(test_side, "policy-test")
    return CorpusSplit(
        policy_train_classifier_train=tr_ct,
        policy_train_classifier_test=tr_cx,
        policy_test_classifier_train=te_ct,
        policy_test_classifier_test=te_cx,
        held_out_predicates=held,
    )


@dataclass(frozen=True)
class InteractionSizes:
    active_train: int = 8
    active_test: int = 4


def sample_interaction(
    corpus: Corpus,
    split: CorpusSplit,
    side: str,
    sizes: InteractionSizes,
    rng: np.random.Generator,
    max_retries: int = 100,
) -> Interaction:
    """Draw one interaction: train/test sets without replacement, describable target."""
    ct, cx = split.side(side)
    train_pool = sorted(ct)
    test_pool = sorted(cx)
    if len(train_pool) < sizes.active_train:
        raise SamplingError(
            f"{side} classifier-train subset has {len(train_pool)} regions, "
            f"needs {sizes.active_train}"
        )
    if len(test_pool) < sizes.active_test:
        raise SamplingError(
            f"{side} classifier-test subset has {len(test_pool)} regions, "
            f"needs {sizes.active_test}"
        )
    for _ in range(max_retries):
        train_idx = rng.choice(len(train_pool), size=sizes.active_train, replace=False)
        test_idx = rng.choice(len(test_pool), size=sizes.active_test, replace=False)
        active_train = tuple(train_pool[i] for i in train_idx)
        active_test = tuple(test_pool[i] for i in test_idx)
        describable = [rid for rid in active_test if corpus.by_id[rid].describable()]
        if not describable:
            continue
        while True:
            target = active_test[int(rng.integers(len(active_test)))]
            if corpus.by_id[target].describable():
                break
        return Interaction(
            active_train=active_train,
            active_test=active_test,
            target=target,
            description_predicates=corpus.by_id[target].description_predicates,
        )
    raise SamplingError(f"{side}: no describable target after {max_retries} draws")
