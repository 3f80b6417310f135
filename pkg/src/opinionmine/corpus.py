"""Core record types (reviews, opinion units) and their JSON-lines formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class CorpusFormatError(ValueError):
    """A reviews/units file could not be parsed or violates an invariant."""


@dataclass(frozen=True)
class Review:
    """One raw review document with its star rating (1-5) and metadata tags."""

    review_id: str
    text: str
    stars: int
    tags: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.review_id:
            raise ValueError("review_id must be non-empty")
        if not self.text:
            raise ValueError(f"review {self.review_id!r}: text must be non-empty")
        if self.stars not in (1, 2, 3, 4, 5):
            raise ValueError(f"review {self.review_id!r}: stars must be in 1..5, got {self.stars!r}")


@dataclass(frozen=True)
class OpinionUnit:
    """A single aspect-delineated opinion: label, supporting excerpt, sentiment 1-10.

    Sentiment 1 is very negative, 10 very positive. An opinion unit is the
    atomic clusterable document of the pipeline; `review_id` links it back to
    its source review.
    """

    unit_id: str
    review_id: str
    label: str
    excerpt: str
    sentiment: int

    def __post_init__(self) -> None:
        if not self.unit_id:
            raise ValueError("unit_id must be non-empty")
        if not self.label:
            raise ValueError(f"unit {self.unit_id!r}: label must be non-empty")
        if not 1 <= self.sentiment <= 10:
            raise ValueError(f"unit {self.unit_id!r}: sentiment must be in 1..10, got {self.sentiment}")


def _iter_jsonl(text: str, source: str) -> Iterable[tuple[int, dict]]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{source}:{lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise CorpusFormatError(f"{source}:{lineno}: expected an object per line")
        yield lineno, obj


def loads_reviews(text: str, source: str = "<string>") -> list[Review]:
    """Parse reviews from JSON-lines text; enforces unique review_ids."""
    reviews: list[Review] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(text, source):
        try:
            review = Review(
                review_id=str(obj["review_id"]),
                text=str(obj["text"]),
                stars=int(obj["stars"]),
                tags={str(k): str(v) for k, v in (obj.get("tags") or {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{source}:{lineno}: {exc}") from exc
        if review.review_id in seen:
            raise CorpusFormatError(f"{source}:{lineno}: duplicate review_id {review.review_id!r}")
        seen.add(review.review_id)
        reviews.append(review)
    return reviews


def load_reviews(path: str | Path) -> list[Review]:
    path = Path(path)
    return loads_reviews(path.read_text(encoding="utf-8"), source=str(path))


def save_reviews(reviews: Iterable[Review], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in reviews:
            fh.write(json.dumps(
                {"review_id": r.review_id, "text": r.text, "stars": r.stars, "tags": r.tags},
                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def loads_units(text: str, source: str = "<string>") -> list[OpinionUnit]:
    """Parse opinion units from JSON-lines text; enforces unique unit_ids."""
    units: list[OpinionUnit] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(text, source):
        try:
            unit = OpinionUnit(
                unit_id=str(obj["unit_id"]),
                review_id=str(obj["review_id"]),
                label=str(obj["label"]),
                excerpt=str(obj["excerpt"]),
                sentiment=int(obj["sentiment"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"{source}:{lineno}: {exc}") from exc
        if unit.unit_id in seen:
            raise CorpusFormatError(f"{source}:{lineno}: duplicate unit_id {unit.unit_id!r}")
        seen.add(unit.unit_id)
        units.append(unit)
    return units


def load_units(path: str | Path) -> list[OpinionUnit]:
    path = Path(path)
    return loads_units(path.read_text(encoding="utf-8"), source=str(path))


def save_units(units: Iterable[OpinionUnit], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for u in units:
            fh.write(json.dumps(
                {"unit_id": u.unit_id, "review_id": u.review_id, "label": u.label,
                 "excerpt": u.excerpt, "sentiment": u.sentiment},
                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def check_units_resolve(units: Iterable[OpinionUnit], reviews: Iterable[Review]) -> None:
    """Raise if any unit references a review_id absent from the corpus."""
    known = {r.review_id for r in reviews}
    for u in units:
        if u.review_id not in known:
            raise CorpusFormatError(f"unit {u.unit_id!r} references unknown review {u.review_id!r}")


def unit_text(unit: OpinionUnit) -> str:
    """The clusterable document text for a unit: label and excerpt joined."""
    return f"{unit.label}: {unit.excerpt}"
