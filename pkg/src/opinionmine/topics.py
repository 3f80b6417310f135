"""Topic models over opinion-unit vectors.

Builds hard density clusters in a reduced space, merges down to a target
topic count, summarizes each topic (keywords, representative units), and
optionally splits the corpus by sentiment before clustering so positive and
negative opinions form separate, polarity-tagged topics.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import OpinionUnit, unit_text
from .density import hdbscan
from .embedding import EmbeddingVector, as_matrix
from .reduction import reduce_dims

OUTLIER = -1

METHODS = ("m1", "m2", "m3")

NEGATIVE_MAX_SCORE = 5  # sentiment <= 5 is negative, > 5 positive


@dataclass(frozen=True)
class TopicModelConfig:
    k: int = 20
    min_cluster_size: int = 50
    min_samples: int | None = None   # defaults to min_cluster_size
    reduced_dim: int = 5
    seed: int = 0
    method: str = "m1"
    split_k: int | None = None       # m3 only; defaults to ceil(k / 2) per split

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.reduced_dim < 1:
            raise ValueError("reduced_dim must be >= 1")

    @property
    def effective_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size

    @property
    def per_split_k(self) -> int:
        return self.split_k if self.split_k is not None else math.ceil(self.k / 2)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.min_samples,
            "reduced_dim": self.reduced_dim,
            "seed": self.seed,
            "method": self.method,
            "split_k": self.split_k,
        }

    def config_hash(self, extra: dict | None = None) -> str:
        payload = dict(self.to_dict())
        if extra:
            payload.update(extra)
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class Topic:
    topic_id: int
    size: int
    centroid: tuple[float, ...]
    keywords: list[str]
    polarity: str  # positive | negative | unsplit
    representative_unit_ids: list[str]


@dataclass
class SplitCorpus:
    """Units partitioned at the sentiment midpoint, positive scores rescaled."""

    negative: list[OpinionUnit]
    positive: list[OpinionUnit]
    rescaled: dict[str, int]  # unit_id -> score on the 1-5 scale


@dataclass
class TopicModel:
    config: TopicModelConfig
    config_hash: str
    assignment: dict[str, int]          # unit_id -> topic_id (OUTLIER allowed)
    topics: list[Topic]
    merge_log: list[tuple[int, int]] = field(default_factory=list)
    degenerate_reduction: bool = False

    @property
    def method(self) -> str:
        return self.config.method

    def topic_by_id(self, topic_id: int) -> Topic:
        for t in self.topics:
            if t.topic_id == topic_id:
                return t
        raise KeyError(f"no topic {topic_id}")

    def outlier_rate(self) -> float:
        return outlier_rate(self.assignment)

    def effective_score(self, unit: OpinionUnit) -> int:
        """Sentiment on the scale regression consumes: 1-10, or 1-5 under m3."""
        if self.config.method == "m3":
            return rescale_positive(unit.sentiment) if unit.sentiment > NEGATIVE_MAX_SCORE \
                else unit.sentiment
        return unit.sentiment


def rescale_positive(score: int) -> int:
    """Map a positive sentiment 6..10 onto the 1..5 scale."""
    if not 6 <= score <= 10:
        raise ValueError(f"positive scores are 6..10, got {score}")
    return score - 5


def restore_positive(rescaled: int) -> int:
    """Inverse of rescale_positive."""
    if not 1 <= rescaled <= 5:
        raise ValueError(f"rescaled scores are 1..5, got {rescaled}")
    return rescaled + 5


def split_by_sentiment(units: Sequence[OpinionUnit]) -> SplitCorpus:
    """Partition units at the midpoint: <= 5 negative, > 5 positive (rescaled)."""
    negative, positive, rescaled = [], [], {}
    for u in units:
        if u.sentiment > NEGATIVE_MAX_SCORE:
            positive.append(u)
            rescaled[u.unit_id] = rescale_positive(u.sentiment)
        else:
            negative.append(u)
            rescaled[u.unit_id] = u.sentiment
    return SplitCorpus(negative=negative, positive=positive, rescaled=rescaled)


def outlier_rate(assignment: dict[str, int]) -> float:
    if not assignment:
        raise ValueError("assignment is empty")
    outliers = sum(1 for t in assignment.values() if t == OUTLIER)
    return outliers / len(assignment)


def reduce_topics(labels: np.ndarray, vectors: np.ndarray,
                  k: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Merge the smallest topic into its most cosine-similar peer until <= k.

    Outliers are untouched. Similarity is between topic centroids in the
    given vector space; ties break toward the lowest topic label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    labels = labels.copy()
    ids = sorted(int(t) for t in set(labels.tolist()) if t != OUTLIER)
    sums = {t: vectors[labels == t].sum(axis=0) for t in ids}
    counts = {t: int((labels == t).sum()) for t in ids}
    log: list[tuple[int, int]] = []
    while len(ids) > k:
        source = min(ids, key=lambda t: (counts[t], t))
        src_centroid = sums[source] / counts[source]
        src_norm = np.linalg.norm(src_centroid)
        best_target, best_sim = None, -np.inf
        for t in ids:  # ascending ids, so the lowest label wins exact ties
            if t == source:
                continue
            centroid = sums[t] / counts[t]
            denom = src_norm * np.linalg.norm(centroid)
            sim = float(src_centroid @ centroid / denom) if denom > 0 else -1.0
            if sim > best_sim:
                best_target, best_sim = t, sim
        assert best_target is not None
        labels[labels == source] = best_target
        sums[best_target] = sums[best_target] + sums[source]
        counts[best_target] += counts[source]
        del sums[source], counts[source]
        ids.remove(source)
        log.append((source, best_target))
    return labels, log


_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def _tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.lower()) if len(t) >= 2]


def topic_keywords(texts_by_topic: dict[int, list[str]], top_n: int = 10) -> dict[int, list[str]]:
    """Class-weighted term ranking per topic.

    weight(term, topic) = tf(term in topic) * log(1 + A / tf(term across
    topics)) with A the average token count per topic; ties break
    alphabetically.
    """
    if not texts_by_topic:
        raise ValueError("no topics given")
    counts = {t: Counter(tok for text in texts for tok in _tokenize(text))
              for t, texts in texts_by_topic.items()}
    total = Counter()
    for c in counts.values():
        total.update(c)
    avg_tokens = sum(total.values()) / len(counts)
    result = {}
    for t, c in counts.items():
        scored = sorted(
            ((tf * math.log(1.0 + avg_tokens / total[term]), term) for term, tf in c.items()),
            key=lambda pair: (-pair[0], pair[1]))
        result[t] = [term for _, term in scored[:top_n]]
    return result


def representative_units(member_ids: Sequence[str], member_vectors: np.ndarray,
                         n: int) -> list[str]:
    """The n member units nearest the centroid by cosine; ties break by id."""
    if len(member_ids) == 0:
        raise ValueError("topic has no members")
    centroid = member_vectors.mean(axis=0)
    c_norm = np.linalg.norm(centroid)
    norms = np.linalg.norm(member_vectors, axis=1)
    denom = norms * c_norm
    sims = np.where(denom > 0, member_vectors @ centroid / np.where(denom > 0, denom, 1.0), -1.0)
    order = sorted(range(len(member_ids)), key=lambda i: (1.0 - float(sims[i]), member_ids[i]))
    return [member_ids[i] for i in order[:n]]


def _cluster_side(ids: list[str], matrix: np.ndarray, config: TopicModelConfig,
                  k: int) -> tuple[dict[str, int], list[tuple[int, int]], bool]:
    """Reduce + cluster + merge one corpus (or one sentiment split)."""
    n = len(ids)
    if n == 0:
        return {}, [], False
    eff_dim = min(config.reduced_dim, n, matrix.shape[1])
    reduction = reduce_dims(matrix, eff_dim, seed=config.seed)
    labels = hdbscan(reduction.values, config.min_cluster_size, config.effective_min_samples)
    labels, log = reduce_topics(labels, matrix, k)
    return dict(zip(ids, (int(t) for t in labels))), log, reduction.degenerate


def build_topic_model(units: Sequence[OpinionUnit], vectors: Sequence[EmbeddingVector],
                      config: TopicModelConfig, top_keywords: int = 10,
                      representatives: int = 5,
                      corpus_key: str | None = None) -> TopicModel:
    """Cluster unit vectors into a topic model per the configured method.

    m1/m2 cluster the whole corpus (the tag records which embedding family
    produced the vectors); m3 splits at the sentiment midpoint and clusters
    each side separately with per_split_k topics, tagging polarity.
    """
    if not units:
        raise ValueError("no units to model")
    by_id = {v.unit_id: v for v in vectors}
    missing = [u.unit_id for u in units if u.unit_id not in by_id]
    if missing:
        raise ValueError(f"missing vectors for units: {missing[:5]}")
    ordered = [by_id[u.unit_id] for u in units]
    ids, matrix = as_matrix(ordered)
    unit_by_id = {u.unit_id: u for u in units}
    row_index = {uid: i for i, uid in enumerate(ids)}

    merge_log: list[tuple[int, int]] = []
    degenerate = False
    if config.method == "m3":
        split = split_by_sentiment(units)
        raw: dict[str, int] = {}
        polarity_of_internal: dict[int, str] = {}
        offset = 0
        for polarity, side_units in (("negative", split.negative), ("positive", split.positive)):
            side_ids = [u.unit_id for u in side_units]
            index = [row_index[uid] for uid in side_ids]
            side_matrix = matrix[index] if side_ids else matrix[:0]
            assignment, log, degen = _cluster_side(side_ids, side_matrix, config,
                                                   config.per_split_k)
            degenerate = degenerate or degen
            internal = sorted(set(assignment.values()) - {OUTLIER})
            remap = {t: offset + i for i, t in enumerate(internal)}
            for uid, t in assignment.items():
                raw[uid] = remap.get(t, OUTLIER)
            for t in remap.values():
                polarity_of_internal[t] = polarity
            merge_log.extend((s + offset, d + offset) for s, d in log)
            offset += len(internal)
        assignment = raw
    else:
        assignment, merge_log, degenerate = _cluster_side(list(ids), matrix, config, config.k)
        polarity_of_internal = {t: "unsplit" for t in set(assignment.values()) if t != OUTLIER}

    # Final dense topic ids: negative block before positive, larger topics first
    internal_ids = sorted(set(assignment.values()) - {OUTLIER})
    sizes = Counter(t for t in assignment.values() if t != OUTLIER)
    polarity_order = {"negative": 0, "positive": 1, "unsplit": 0}
    ranked = sorted(internal_ids,
                    key=lambda t: (polarity_order[polarity_of_internal[t]], -sizes[t], t))
    final_id = {t: i for i, t in enumerate(ranked)}
    assignment = {uid: final_id.get(t, OUTLIER) for uid, t in assignment.items()}

    members: dict[int, list[str]] = {}
    for uid in ids:  # corpus order keeps everything deterministic
        t = assignment[uid]
        if t != OUTLIER:
            members.setdefault(t, []).append(uid)

    texts_by_topic = {t: [unit_text(unit_by_id[uid]) for uid in uids]
                      for t, uids in members.items()}
    keywords = topic_keywords(texts_by_topic, top_n=top_keywords) if members else {}

    topics: list[Topic] = []
    for internal in ranked:
        t = final_id[internal]
        uids = members[t]
        vecs = matrix[[row_index[uid] for uid in uids]]
        centroid = vecs.mean(axis=0)
        topics.append(Topic(
            topic_id=t,
            size=len(uids),
            centroid=tuple(float(x) for x in centroid),
            keywords=keywords.get(t, []),
            polarity=polarity_of_internal[internal],
            representative_unit_ids=representative_units(uids, vecs, representatives),
        ))

    extra = {"corpus_key": corpus_key} if corpus_key else None
    return TopicModel(
        config=config,
        config_hash=config.config_hash(extra),
        assignment=assignment,
        topics=topics,
        merge_log=merge_log,
        degenerate_reduction=degenerate,
    )


# --- model artifact directory ----------------------------------------------

def save_model(model: TopicModel, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config_doc = {
        "config": model.config.to_dict(),
        "config_hash": model.config_hash,
        "merge_log": [list(pair) for pair in model.merge_log],
        "degenerate_reduction": model.degenerate_reduction,
        "n_units": len(model.assignment),
        "n_topics": len(model.topics),
        "outlier_rate": model.outlier_rate(),
    }
    (directory / "config.json").write_text(
        json.dumps(config_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with (directory / "assignments.jsonl").open("w", encoding="utf-8") as fh:
        for uid, topic in model.assignment.items():
            fh.write(json.dumps({"unit_id": uid, "topic": topic}, sort_keys=True))
            fh.write("\n")
    topic_docs = [{
        "topic_id": t.topic_id,
        "size": t.size,
        "polarity": t.polarity,
        "keywords": t.keywords,
        "representative_unit_ids": t.representative_unit_ids,
        "centroid": list(t.centroid),
    } for t in model.topics]
    (directory / "topics.json").write_text(
        json.dumps(topic_docs, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(directory: str | Path) -> TopicModel:
    directory = Path(directory)
    config_doc = json.loads((directory / "config.json").read_text(encoding="utf-8"))
    config = TopicModelConfig(**config_doc["config"])
    assignment: dict[str, int] = {}
    with (directory / "assignments.jsonl").open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                assignment[obj["unit_id"]] = int(obj["topic"])
    topics = [Topic(
        topic_id=doc["topic_id"],
        size=doc["size"],
        centroid=tuple(doc["centroid"]),
        keywords=list(doc["keywords"]),
        polarity=doc["polarity"],
        representative_unit_ids=list(doc["representative_unit_ids"]),
    ) for doc in json.loads((directory / "topics.json").read_text(encoding="utf-8"))]
    return TopicModel(
        config=config,
        config_hash=config_doc["config_hash"],
        assignment=assignment,
        topics=topics,
        merge_log=[tuple(pair) for pair in config_doc["merge_log"]],
        degenerate_reduction=config_doc["degenerate_reduction"],
    )
