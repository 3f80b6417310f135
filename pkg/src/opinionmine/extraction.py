"""Turn raw reviews into opinion units via a chat-completion endpoint.

The prompt instructs the model to return a bracketed array of
[label, excerpt, sentiment] triples; parsing tolerates code fences and
surrounding prose. Opinions about the establishment as a whole carry the
"overall experience" label and are filtered out before topic analysis.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import requests

from .corpus import OpinionUnit, Review

logger = logging.getLogger(__name__)

DEFAULT_OVERALL_LABEL = "overall experience"

PROMPT_TEMPLATE = """\
Perform aspect-based sentiment analysis for the restaurant review provided as the input. Return each aspect-sentiment pair with a label and a corresponding excerpt from the text. Also rate the sentiment of each aspect on a scale from 1-10 where 1 is highly negative and 10 is highly positive.

Aspect-sentiment pairs should not mix opinions on different aspects. Make sure to include all aspects. An aspect should be independent and not have to rely on other aspects to be understood.

If an opinion in the review is about the restaurant or experience in general then label this aspect as "overall experience". Opinions not related to the restaurant should not be included.

Example input: I just left Mary's with my lovely wife. We had a very mixed experience. 3 out of 5 stars. The gorgeous outdoor patio seating was fantastic with a nice view of the ocean. First, we split a dozen oysters. They were the best I had in my life! FRESH! Delicious! The avocado toast was excellent as were the crab cakes. However, I absolutely hated the dessert we ordered and did not particularly like my cocktail. Also, the staff could have been a little friendlier.

Example output:
[["Overall experience","We had a very mixed experience. 3 out of 5 stars.",6],
["Outdoor patio seating","The gorgeous outdoor patio seating was fantastic with a nice view of the ocean",9],
["View","a nice view of the ocean",8],
["Oysters","we split a dozen oysters. They were the best I had in my life! FRESH! Delicious!",10],
["Avocado toast","the avocado toast was excellent",9],
["Crab cakes","the crab cakes were excellent",9],
["Dessert","I absolutely hated the dessert we ordered",1],
["Cocktail","I did not particularly like my cocktail",3],
["Staff friendliness","the staff could have been a little friendlier",4]]

Input: {review}

Output:"""


class UnparseableResponse(ValueError):
    """The endpoint reply contained no well-formed array of opinion triples."""


class TransportError(RuntimeError):
    """The endpoint could not be reached or returned a malformed/error body."""


class ExtractionFailed(RuntimeError):
    """Every review in the corpus failed extraction."""


@dataclass(frozen=True)
class ExtractionConfig:
    endpoint_url: str = ""
    model: str = ""
    api_key_env: str = "OPINIONMINE_API_KEY"
    max_retries: int = 3
    backoff_base: float = 0.5
    cache_dir: str | None = None
    overall_label: str = DEFAULT_OVERALL_LABEL
    parallelism: int = 4
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


@dataclass
class ExtractionStats:
    reviews_total: int = 0
    reviews_failed: int = 0
    llm_calls: int = 0
    cache_hits: int = 0
    units_raw: int = 0
    units_kept: int = 0
    overall_removed: int = 0
    clamped_scores: int = 0
    excerpt_not_substring: int = 0
    mean_units_per_review: float = 0.0


@dataclass
class ExtractionResult:
    units: list[OpinionUnit]
    stats: ExtractionStats
    failures: list[dict] = field(default_factory=list)


def build_prompt(review: Review) -> str:
    """Render the extraction prompt with the review text in the input slot."""
    if not review.text.strip():
        raise ValueError(f"review {review.review_id!r}: empty text")
    return PROMPT_TEMPLATE.format(review=review.text)


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)

# LaTeX-style and typographic quotes occasionally leak into model output.
_QUOTE_FIXES = [("``", '"'), ("''", '"'), ("“", '"'), ("”", '"'),
                ("‘", "'"), ("’", "'")]


def _normalize_quotes(text: str) -> str:
    for src, dst in _QUOTE_FIXES:
        text = text.replace(src, dst)
    return text


def _bracketed_candidates(text: str) -> list[str]:
    """Substrings from each '[' to its matching ']', honoring string literals."""
    candidates = []
    starts = [i for i, ch in enumerate(text) if ch == "["]
    for start in starts:
        depth = 0
        in_str: str | None = None
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str is not None:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == in_str:
                    in_str = None
                continue
            if ch in "\"'":
                in_str = ch
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    candidates.append(text[start:i + 1])
                    break
    return candidates


def _coerce_triples(obj: object) -> list[tuple[str, str, float]] | None:
    if not isinstance(obj, (list, tuple)):
        return None
    items: Sequence = obj
    if len(items) == 3 and isinstance(items[0], str) and isinstance(items[1], str) \
            and isinstance(items[2], (int, float)):
        items = [items]  # bare single triple without the outer array
    triples = []
    for entry in items:
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            return None
        label, excerpt, score = entry
        if not isinstance(label, str) or not label.strip() or not isinstance(excerpt, str):
            return None
        if isinstance(score, str):
            try:
                score = float(score)
            except ValueError:
                return None
        if not isinstance(score, (int, float)):
            return None
        triples.append((label.strip(), excerpt, float(score)))
    return triples


def parse_extraction(raw: str, review_id: str) -> tuple[list[OpinionUnit], list[str]]:
    """Parse an endpoint reply into opinion units.

    Accepts the bracketed triple array anywhere in the reply, including
    inside a code fence. Scores are rounded to integers and clamped to
    [1, 10]; each clamp is reported in the returned warnings list.

    Raises UnparseableResponse when no well-formed triple array is found.
    """
    texts = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    texts.append(raw)
    for text in texts:
        for candidate in _bracketed_candidates(_normalize_quotes(text)):
            obj = None
            try:
                obj = json.loads(candidate)
            except json.JSONDecodeError:
                try:
                    obj = ast.literal_eval(candidate)
                except (ValueError, SyntaxError):
                    continue
            if obj == []:
                return [], []
            triples = _coerce_triples(obj)
            if triples is None:
                continue
            units: list[OpinionUnit] = []
            warnings: list[str] = []
            for idx, (label, excerpt, score) in enumerate(triples):
                sentiment = int(round(score))
                if not 1 <= sentiment <= 10:
                    clamped = min(10, max(1, sentiment))
                    warnings.append(
                        f"review {review_id}: sentiment {sentiment} for {label!r} clamped to {clamped}")
                    sentiment = clamped
                units.append(OpinionUnit(
                    unit_id=f"{review_id}:u{idx}",
                    review_id=review_id,
                    label=label,
                    excerpt=excerpt,
                    sentiment=sentiment,
                ))
            return units, warnings
    raise UnparseableResponse(f"review {review_id}: no opinion-triple array in response")


def filter_overall(units: Sequence[OpinionUnit],
                   overall_label: str = DEFAULT_OVERALL_LABEL) -> list[OpinionUnit]:
    """Drop units labeled as overall-experience opinions (case-insensitive)."""
    target = overall_label.strip().casefold()
    return [u for u in units if u.label.strip().casefold() != target]


class ResponseCache:
    """Write-once file cache keyed by the SHA-256 of the prompt text.

    Concurrent writers race benignly: each writes a temp file and atomically
    renames it onto the key; late writers just overwrite with identical
    content (responses are only cached after a successful parse).
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def _path(self, prompt: str) -> Path:
        return self.directory / f"{self.key(prompt)}.json"

    def get(self, prompt: str) -> str | None:
        path = self._path(prompt)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response"]

    def put(self, prompt: str, response: str) -> None:
        path = self._path(prompt)
        if path.exists():
            return
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump({"prompt_sha256": self.key(prompt), "response": response}, fh)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


class ChatCompletionClient:
    """Minimal chat-completion HTTP client (OpenAI-compatible request shape)."""

    def __init__(self, endpoint_url: str, model: str, api_key: str | None = None,
                 timeout: float = 60.0, session: requests.Session | None = None):
        self.endpoint_url = endpoint_url
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        try:
            resp = self.session.post(self.endpoint_url, json=payload, headers=headers,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.endpoint_url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"endpoint returned HTTP {resp.status_code}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {exc}") from exc


def client_from_config(config: ExtractionConfig) -> ChatCompletionClient:
    api_key = os.environ.get(config.api_key_env) if config.api_key_env else None
    return ChatCompletionClient(config.endpoint_url, config.model, api_key=api_key,
                                timeout=config.timeout)


def extract_corpus(reviews: Sequence[Review], config: ExtractionConfig,
                   client: ChatCompletionClient | None = None,
                   sleep: Callable[[float], None] = time.sleep) -> ExtractionResult:
    """Extract opinion units for every review, with caching and retries.

    One endpoint call per review; a cache hit skips the call entirely.
    Transport and parse failures retry with exponential backoff
    (backoff_base * 2**attempt). A review whose retries are exhausted is
    recorded as a failure and skipped; ExtractionFailed is raised only when
    every review fails. Overall-experience units are removed from the output
    and counted in the stats.
    """
    if client is None:
        client = client_from_config(config)
    cache = ResponseCache(config.cache_dir) if config.cache_dir else None
    stats = ExtractionStats(reviews_total=len(reviews))
    review_by_id = {r.review_id: r for r in reviews}

    def run_one(review: Review) -> tuple[list[OpinionUnit], list[str], bool, int]:
        prompt = build_prompt(review)
        if cache is not None:
            cached = cache.get(prompt)
            if cached is not None:
                units, warnings = parse_extraction(cached, review.review_id)
                return units, warnings, True, 0
        last_exc: Exception | None = None
        calls = 0
        for attempt in range(config.max_retries + 1):
            if attempt > 0:
                sleep(config.backoff_base * (2 ** (attempt - 1)))
            try:
                calls += 1
                raw = client.complete(prompt)
                units, warnings = parse_extraction(raw, review.review_id)
            except (TransportError, UnparseableResponse) as exc:
                last_exc = exc
                continue
            if cache is not None:
                cache.put(prompt, raw)
            return units, warnings, False, calls
        assert last_exc is not None
        raise _ReviewFailed(review.review_id, str(last_exc), calls)

    workers = min(config.parallelism, max(1, len(reviews)))
    results: dict[str, list[OpinionUnit]] = {}
    failures: list[dict] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_one, r): r for r in reviews}
        for future, review in futures.items():
            try:
                units, warnings, was_cached, calls = future.result()
            except _ReviewFailed as exc:
                failures.append({"review_id": exc.review_id, "error": exc.message})
                stats.reviews_failed += 1
                stats.llm_calls += exc.calls
                continue
            stats.cache_hits += 1 if was_cached else 0
            stats.llm_calls += calls
            stats.clamped_scores += len(warnings)
            for w in warnings:
                logger.warning(w)
            results[review.review_id] = units

    if reviews and not results:
        raise ExtractionFailed(f"all {len(reviews)} reviews failed extraction")

    all_units: list[OpinionUnit] = []
    for review in reviews:  # deterministic corpus order regardless of thread timing
        units = results.get(review.review_id)
        if units is None:
            continue
        stats.units_raw += len(units)
        kept = filter_overall(units, config.overall_label)
        stats.overall_removed += len(units) - len(kept)
        for u in kept:
            if u.excerpt and u.excerpt.casefold() not in review_by_id[u.review_id].text.casefold():
                stats.excerpt_not_substring += 1
        all_units.extend(kept)
    stats.units_kept = len(all_units)
    succeeded = stats.reviews_total - stats.reviews_failed
    stats.mean_units_per_review = (len(all_units) / succeeded) if succeeded else 0.0
    return ExtractionResult(units=all_units, stats=stats, failures=failures)


class _ReviewFailed(Exception):
    def __init__(self, review_id: str, message: str, calls: int):
        super().__init__(message)
        self.review_id = review_id
        self.message = message
        self.calls = calls
