"""Cluster-quality metrics, annotation-sample export/import, and the planted
synthetic benchmark used to test the full pipeline end to end.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import OpinionUnit, Review
from .embedding import EmbeddingVector
from .topics import NEGATIVE_MAX_SCORE, OUTLIER, TopicModel


class AnnotationError(ValueError):
    """An annotation record is inconsistent (unknown ids, missing judgments)."""


class InfeasibleGeometry(ValueError):
    """Cannot place the requested topic centroids in the requested dimension."""


# --- precision metrics ------------------------------------------------------

def sentiment_precision(units: Sequence[OpinionUnit]) -> float:
    """Share of units carrying the dominant polarity (scores > 5 are positive).

    Always >= 0.5 by construction.
    """
    if not units:
        raise ValueError("sentiment_precision of an empty topic is undefined")
    positive = sum(1 for u in units if u.sentiment > NEGATIVE_MAX_SCORE) / len(units)
    return max(positive, 1.0 - positive)


@dataclass
class AnnotationRecord:
    evaluator_id: str
    topic_id: int
    topic_name: str
    sampled_unit_ids: list[str]
    error_unit_ids: list[str]

    def __post_init__(self) -> None:
        extraneous = set(self.error_unit_ids) - set(self.sampled_unit_ids)
        if extraneous:
            raise AnnotationError(
                f"evaluator {self.evaluator_id!r}, topic {self.topic_id}: error ids "
                f"{sorted(extraneous)} are not in the sampled set")
        if not self.sampled_unit_ids:
            raise AnnotationError(
                f"evaluator {self.evaluator_id!r}, topic {self.topic_id}: empty sample")

    def judged_error(self, unit_id: str) -> bool:
        return unit_id in set(self.error_unit_ids)


def topic_precision(records: Sequence[AnnotationRecord], pooled: bool = False) -> float:
    """Per-evaluator precision (|sampled| - |errors|) / |sampled|, averaged.

    With pooled=True, counts are pooled across evaluators instead of
    averaging the per-evaluator ratios.
    """
    if not records:
        raise ValueError("no annotation records")
    if pooled:
        sampled = sum(len(r.sampled_unit_ids) for r in records)
        errors = sum(len(r.error_unit_ids) for r in records)
        return (sampled - errors) / sampled
    ratios = [(len(r.sampled_unit_ids) - len(r.error_unit_ids)) / len(r.sampled_unit_ids)
              for r in records]
    return float(sum(ratios) / len(ratios))


def inter_rater_agreement(records: Sequence[AnnotationRecord],
                          overlap_ids: dict[int, list[str]] | None = None) -> float:
    """m/n over units judged by every evaluator of a topic.

    A unit counts as agreed when all evaluators gave it the identical
    fits-theme/error judgment (error means listed in the evaluator's error
    ids). By default the overlap set is the intersection of the evaluators'
    samples; pass overlap_ids to check an explicit per-topic overlap, in
    which case a unit missing from some evaluator's sample raises.
    """
    by_topic: dict[int, list[AnnotationRecord]] = {}
    for r in records:
        by_topic.setdefault(r.topic_id, []).append(r)
    m = n = 0
    for topic_id, topic_records in sorted(by_topic.items()):
        if overlap_ids is not None:
            overlap = overlap_ids.get(topic_id, [])
            for r in topic_records:
                missing = set(overlap) - set(r.sampled_unit_ids)
                if missing:
                    raise AnnotationError(
                        f"evaluator {r.evaluator_id!r}, topic {topic_id}: no judgment for "
                        f"overlap unit(s) {sorted(missing)}")
        else:
            shared = set(topic_records[0].sampled_unit_ids)
            for r in topic_records[1:]:
                shared &= set(r.sampled_unit_ids)
            overlap = sorted(shared)
        for uid in overlap:
            judgments = {r.judged_error(uid) for r in topic_records}
            n += 1
            m += 1 if len(judgments) == 1 else 0
    if n == 0:
        raise ValueError("no overlap units judged by all evaluators")
    return m / n


@dataclass
class PrecisionReport:
    topic_precision: dict[int, float]
    sentiment_precision: dict[int, float]
    mean_topic_precision: float
    mean_sentiment_precision: float
    share_topics_at_90: float       # share of topics with topic precision >= .9
    outlier_rate: float
    inter_rater: float | None = None


def precision_report(model: TopicModel, units: Sequence[OpinionUnit],
                     records: Sequence[AnnotationRecord] | None = None,
                     pooled: bool = False) -> PrecisionReport:
    by_topic: dict[int, list[OpinionUnit]] = {}
    for u in units:
        t = model.assignment.get(u.unit_id, OUTLIER)
        if t != OUTLIER:
            by_topic.setdefault(t, []).append(u)
    sent = {t: sentiment_precision(us) for t, us in sorted(by_topic.items())}
    topic_prec: dict[int, float] = {}
    agreement = None
    if records:
        by_tid: dict[int, list[AnnotationRecord]] = {}
        for r in records:
            by_tid.setdefault(r.topic_id, []).append(r)
        topic_prec = {t: topic_precision(rs, pooled=pooled) for t, rs in sorted(by_tid.items())}
        agreement = inter_rater_agreement(records)
    mean_tp = float(np.mean(list(topic_prec.values()))) if topic_prec else float("nan")
    share90 = (float(np.mean([1.0 if v >= 0.9 else 0.0 for v in topic_prec.values()]))
               if topic_prec else float("nan"))
    return PrecisionReport(
        topic_precision=topic_prec,
        sentiment_precision=sent,
        mean_topic_precision=mean_tp,
        mean_sentiment_precision=float(np.mean(list(sent.values()))) if sent else float("nan"),
        share_topics_at_90=share90,
        outlier_rate=model.outlier_rate(),
        inter_rater=agreement)


# --- annotation sampling ----------------------------------------------------

WORKBOOK_COLUMNS = ["topic_id", "evaluator_id", "unit_id", "label", "excerpt",
                    "topic_name", "error"]


@dataclass
class AnnotationWorkbook:
    rows: list[dict]
    flagged_topics: dict[int, str] = field(default_factory=dict)

    def overlap_ids(self) -> dict[int, list[str]]:
        """Per-topic unit ids sampled by every evaluator."""
        per_topic: dict[int, dict[str, set[str]]] = {}
        for row in self.rows:
            per_topic.setdefault(row["topic_id"], {}) \
                .setdefault(row["evaluator_id"], set()).add(row["unit_id"])
        result = {}
        for topic_id, by_eval in per_topic.items():
            samples = list(by_eval.values())
            shared = set(samples[0])
            for s in samples[1:]:
                shared &= s
            result[topic_id] = sorted(shared)
        return result

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=WORKBOOK_COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)


def sample_for_annotation(model: TopicModel, units: Sequence[OpinionUnit],
                          per_topic: int = 20, overlap: int = 5,
                          evaluators: int = 3, seed: int = 0) -> AnnotationWorkbook:
    """Seeded per-evaluator samples with a shared overlap per topic.

    When a topic has enough units, the evaluators' non-overlap portions are
    disjoint, so the all-evaluator intersection is exactly the overlap set.
    Topics smaller than per_topic are sampled exhaustively and flagged; a
    topic too small for disjoint fills deals the remainder round-robin and is
    flagged as well.
    """
    if overlap > per_topic:
        raise ValueError("overlap cannot exceed per_topic")
    if evaluators < 1:
        raise ValueError("need at least one evaluator")
    unit_by_id = {u.unit_id: u for u in units}
    members: dict[int, list[str]] = {}
    for u in units:
        t = model.assignment.get(u.unit_id, OUTLIER)
        if t != OUTLIER:
            members.setdefault(t, []).append(u.unit_id)
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    flagged: dict[int, str] = {}
    evaluator_ids = [f"eval{i + 1}" for i in range(evaluators)]
    for topic_id in sorted(members):
        pool = sorted(members[topic_id])
        if len(pool) < per_topic:
            flagged[topic_id] = "sampled exhaustively: topic smaller than per_topic"
            samples = {ev: list(pool) for ev in evaluator_ids}
        else:
            shuffled = [pool[i] for i in rng.permutation(len(pool))]
            shared = shuffled[:overlap]
            fill = per_topic - overlap
            rest = shuffled[overlap:]
            samples = {}
            if len(rest) >= evaluators * fill:
                for e, ev in enumerate(evaluator_ids):
                    samples[ev] = shared + rest[e * fill:(e + 1) * fill]
            else:
                flagged[topic_id] = "pool too small for disjoint fills; dealt round-robin"
                for e, ev in enumerate(evaluator_ids):
                    take = [rest[(e * fill + i) % len(rest)] for i in range(fill)] if rest else []
                    samples[ev] = shared + take
        for ev in evaluator_ids:
            for uid in samples[ev]:
                unit = unit_by_id[uid]
                rows.append({"topic_id": topic_id, "evaluator_id": ev, "unit_id": uid,
                             "label": unit.label, "excerpt": unit.excerpt,
                             "topic_name": "", "error": ""})
    return AnnotationWorkbook(rows=rows, flagged_topics=flagged)


_TRUTHY = {"x", "1", "true", "yes", "y", "error"}


def load_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Read a filled workbook CSV back into per-evaluator records."""
    grouped: dict[tuple[int, str], dict] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (int(row["topic_id"]), row["evaluator_id"])
            entry = grouped.setdefault(key, {"sampled": [], "errors": [], "name": ""})
            entry["sampled"].append(row["unit_id"])
            if (row.get("error") or "").strip().lower() in _TRUTHY:
                entry["errors"].append(row["unit_id"])
            if (row.get("topic_name") or "").strip():
                entry["name"] = row["topic_name"].strip()
    return [AnnotationRecord(evaluator_id=ev, topic_id=t, topic_name=entry["name"],
                             sampled_unit_ids=entry["sampled"], error_unit_ids=entry["errors"])
            for (t, ev), entry in sorted(grouped.items())]


# --- synthetic planted benchmark --------------------------------------------

_TOPIC_WORDS = ["service", "food", "pricing", "cleanliness", "drinks", "parking",
                "portions", "atmosphere", "waiting", "location", "noise", "menu",
                "seating", "staff", "dessert", "takeout"]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the planted benchmark.

    Planted topics are polarity-pure: the first ceil(T/2) draw negative
    sentiments (1-5), the rest positive (6-10). The planted star model acts
    on the polarity-rescaled 1-5 sentiment scale, so the sentiment-split
    feature construction is the well-specified one. Defaults were calibrated
    so that stars almost never clamp (keeping Var(signal)/Var(star) an honest
    target for a well-specified fit) while positive topics carry enough of
    the signal that mixed-scale features measurably underfit.
    """

    topics: int = 8
    reviews: int = 5000
    units_per_review_mean: float = 5.65
    dim: int = 32
    centroid_separation: float = 1.0   # 1.0 = orthonormal centroids
    jitter: float = 0.08               # gaussian jitter scale before renormalizing
    noise_sigma: float = 0.45          # epsilon on the star scale
    beta0: float | None = None         # None: centered so mean stars sit near 3
    beta: tuple[float, ...] | None = None  # one coefficient per planted topic
    seed: int = 0

    def __post_init__(self) -> None:
        if self.topics < 2:
            raise ValueError("need at least two topics")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 < self.centroid_separation <= 1.0:
            raise ValueError("centroid_separation must be in (0, 1]")
        if self.units_per_review_mean < 1.0:
            raise ValueError("units_per_review_mean must be >= 1")

    @property
    def polarities(self) -> list[str]:
        half = math.ceil(self.topics / 2)
        return ["negative"] * half + ["positive"] * (self.topics - half)

    def default_beta(self) -> tuple[float, ...]:
        if self.beta is not None:
            if len(self.beta) != self.topics:
                raise ValueError(f"beta must have {self.topics} entries")
            return self.beta
        # positive magnitudes dominate; the smallest pair sits below a 0.05
        # noise floor on purpose
        half = math.ceil(self.topics / 2)
        neg = [-float(m) for m in np.linspace(0.08, 0.02, half)]
        pos = [float(m) for m in np.linspace(0.28, 0.10, self.topics - half)]
        return tuple(neg + pos)

    def topic_presence_probability(self) -> float:
        """P(a given topic is mentioned) for unit counts 1 + Poisson(mean-1)."""
        t = self.topics
        lam = self.units_per_review_mean - 1.0
        return 1.0 - (1.0 - 1.0 / t) * math.exp(-lam / t)

    def default_beta0(self) -> float:
        if self.beta0 is not None:
            return self.beta0
        # E[sbar | present] = 3 on the rescaled scale for both polarities
        return 3.0 - 3.0 * self.topic_presence_probability() * sum(self.default_beta())


@dataclass
class SyntheticCorpus:
    spec: SyntheticSpec
    reviews: list[Review]
    units: list[OpinionUnit]
    vectors: list[EmbeddingVector]
    true_topics: dict[str, int]        # unit_id -> planted topic
    polarities: list[str]
    beta0: float
    beta: tuple[float, ...]
    signal: np.ndarray                 # per review, before noise and rounding
    y_linear: np.ndarray               # signal + epsilon
    stars: np.ndarray

    def analytic_r2(self) -> float:
        """Var(signal) / Var(star): the R^2 a perfectly specified fit attains."""
        return float(np.var(self.signal) / np.var(self.stars.astype(float)))

    def true_features(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y_linear) on the planted scale, columns in planted-topic order."""
        x = np.zeros((len(self.reviews), self.spec.topics))
        counts = np.zeros_like(x)
        row = {r.review_id: i for i, r in enumerate(self.reviews)}
        for u in self.units:
            t = self.true_topics[u.unit_id]
            score = u.sentiment - NEGATIVE_MAX_SCORE \
                if self.polarities[t] == "positive" else u.sentiment
            i = row[u.review_id]
            x[i, t] += score
            counts[i, t] += 1
        x = np.divide(x, counts, out=np.zeros_like(x), where=counts > 0)
        return x, self.y_linear.copy()


def _place_centroids(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    need = spec.topics + (0 if spec.centroid_separation == 1.0 else 1)
    if need > spec.dim:
        raise InfeasibleGeometry(
            f"cannot place {spec.topics} separated centroids in dim {spec.dim}")
    q, _ = np.linalg.qr(rng.normal(size=(spec.dim, need)))
    basis = q.T
    if spec.centroid_separation == 1.0:
        return basis[:spec.topics]
    shared = basis[-1]
    s = spec.centroid_separation
    return np.sqrt(s) * basis[:spec.topics] + np.sqrt(1.0 - s) * shared


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    """Planted reviews, units, and unit vectors with known structure.

    Unit vectors are topic centroids plus gaussian jitter, renormalized.
    Sentiments are uniform over the topic's polarity range. Stars are
    round(clamp(beta0 + sum_k beta_k * sbar_k + eps, 1, 5)) with sbar_k the
    mean rescaled (1-5) sentiment of the review's units in planted topic k.
    """
    rng = np.random.default_rng(spec.seed)
    centroids = _place_centroids(spec, rng)
    polarities = spec.polarities
    beta = spec.default_beta()
    beta0 = spec.default_beta0()

    reviews: list[Review] = []
    units: list[OpinionUnit] = []
    vectors: list[EmbeddingVector] = []
    true_topics: dict[str, int] = {}
    signal = np.empty(spec.reviews)

    unit_counts = 1 + rng.poisson(spec.units_per_review_mean - 1.0, size=spec.reviews)
    epsilon = rng.normal(0.0, spec.noise_sigma, size=spec.reviews) \
        if spec.noise_sigma > 0 else np.zeros(spec.reviews)

    for i in range(spec.reviews):
        review_id = f"r{i:05d}"
        m = int(unit_counts[i])
        topic_draws = rng.integers(0, spec.topics, size=m)
        sums = np.zeros(spec.topics)
        counts = np.zeros(spec.topics)
        mentioned: list[str] = []
        for j, t in enumerate(topic_draws):
            t = int(t)
            if polarities[t] == "negative":
                sentiment = int(rng.integers(1, NEGATIVE_MAX_SCORE + 1))
                effective = sentiment
                tone = "poor"
            else:
                sentiment = int(rng.integers(NEGATIVE_MAX_SCORE + 1, 11))
                effective = sentiment - NEGATIVE_MAX_SCORE
                tone = "great"
            word = _TOPIC_WORDS[t % len(_TOPIC_WORDS)]
            unit_id = f"{review_id}:u{j}"
            units.append(OpinionUnit(
                unit_id=unit_id, review_id=review_id,
                label=word,
                excerpt=f"the {word} was {tone} ({sentiment}/10)",
                sentiment=sentiment))
            true_topics[unit_id] = t
            raw = centroids[t] + spec.jitter * rng.normal(size=spec.dim)
            raw = raw / np.linalg.norm(raw)
            vectors.append(EmbeddingVector(unit_id, tuple(float(x) for x in raw)))
            sums[t] += effective
            counts[t] += 1
            mentioned.append(word)
        sbar = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        signal[i] = beta0 + float(beta @ sbar)
        reviews.append(Review(
            review_id=review_id,
            text=f"synthetic review {i} covering " + ", ".join(sorted(set(mentioned))),
            stars=1,  # placeholder, replaced below
            tags={"origin": "synthetic"}))

    y_linear = signal + epsilon
    stars = np.clip(np.rint(y_linear), 1, 5).astype(int)
    reviews = [Review(review_id=r.review_id, text=r.text, stars=int(stars[i]), tags=r.tags)
               for i, r in enumerate(reviews)]
    return SyntheticCorpus(
        spec=spec, reviews=reviews, units=units, vectors=vectors,
        true_topics=true_topics, polarities=polarities,
        beta0=beta0, beta=beta,
        signal=signal, y_linear=y_linear, stars=stars)


def match_topics(model: TopicModel, truth: SyntheticCorpus) -> dict[int, int]:
    """Model topic id -> planted topic, by majority vote of member units."""
    votes: dict[int, Counter] = {}
    for uid, t in model.assignment.items():
        if t == OUTLIER:
            continue
        votes.setdefault(t, Counter())[truth.true_topics[uid]] += 1
    return {t: counter.most_common(1)[0][0] for t, counter in sorted(votes.items())}
