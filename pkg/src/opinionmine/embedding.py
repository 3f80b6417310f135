"""Per-unit embedding vectors: pluggable providers plus on-disk formats.

Providers stand in for whichever sentence-embedding model produced the
vectors (general-purpose or sentiment-aware); this package never runs
neural inference itself. The embedded text for a unit is "{label}: {excerpt}".
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .corpus import OpinionUnit, unit_text


class DimMismatch(ValueError):
    """Vectors in one corpus must all share the same dimension."""


class VectorFormatError(ValueError):
    """A vector file is malformed."""


class EmbeddingTransportError(RuntimeError):
    """The embedding endpoint could not be reached or replied malformed."""


@dataclass(frozen=True)
class EmbeddingVector:
    unit_id: str
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProviderConfig:
    """Exactly one of (endpoint_url, path) selects the provider kind."""

    endpoint_url: str = ""
    model: str = ""
    path: str = ""
    normalize: bool = True
    batch_size: int = 64
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if bool(self.endpoint_url) == bool(self.path):
            raise ValueError("configure exactly one of endpoint_url (remote) or path (file)")

    @property
    def kind(self) -> str:
        return "remote-endpoint" if self.endpoint_url else "file"


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class RemoteEmbeddingProvider:
    """HTTP provider accepting {"model","input":[...]} and returning float arrays.

    Tolerates both a bare array-of-arrays body and the common
    {"data":[{"embedding":[...]}, ...]} envelope.
    """

    def __init__(self, endpoint_url: str, model: str, timeout: float = 60.0,
                 max_retries: int = 3, backoff_base: float = 0.5,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint_url = endpoint_url
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self.sleep = sleep

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt > 0:
                self.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    self.endpoint_url,
                    json={"model": self.model, "input": list(texts)},
                    timeout=self.timeout)
                if resp.status_code != 200:
                    raise EmbeddingTransportError(f"endpoint returned HTTP {resp.status_code}")
                return self._parse_body(resp.json(), len(texts))
            except (requests.RequestException, ValueError) as exc:
                last_exc = EmbeddingTransportError(str(exc))
            except EmbeddingTransportError as exc:
                last_exc = exc
        assert last_exc is not None
        raise last_exc

    @staticmethod
    def _parse_body(body: object, expected: int) -> list[list[float]]:
        if isinstance(body, dict) and "data" in body:
            rows = [item["embedding"] for item in body["data"]]
        elif isinstance(body, list):
            rows = body
        else:
            raise EmbeddingTransportError("unrecognized embeddings response shape")
        if len(rows) != expected:
            raise EmbeddingTransportError(f"expected {expected} vectors, got {len(rows)}")
        return [[float(x) for x in row] for row in rows]


class FileEmbeddingProvider:
    """Serves precomputed vectors for unit texts from a vectors file.

    The file must hold one vector per unit_id; lookups go by unit_id, so this
    provider is wired through embed_units_by_id rather than raw texts.
    """

    def __init__(self, path: str | Path):
        self.by_id = {v.unit_id: v for v in load_vectors(path)}

    def lookup(self, unit_ids: Sequence[str]) -> list[list[float]]:
        missing = [uid for uid in unit_ids if uid not in self.by_id]
        if missing:
            raise VectorFormatError(f"no precomputed vector for unit(s): {missing[:5]}")
        return [list(self.by_id[uid].values) for uid in unit_ids]


def _finalize(unit_ids: Sequence[str], rows: list[list[float]],
              normalize: bool) -> list[EmbeddingVector]:
    dims = {len(r) for r in rows}
    if len(dims) > 1:
        raise DimMismatch(f"provider returned mixed dimensions: {sorted(dims)}")
    arr = np.asarray(rows, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise VectorFormatError("provider returned non-finite values")
    if normalize and arr.size:
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0  # zero vectors stay zero rather than NaN
        arr = arr / norms
    return [EmbeddingVector(uid, tuple(float(x) for x in row))
            for uid, row in zip(unit_ids, arr)]


def embed_units(units: Sequence[OpinionUnit], config: ProviderConfig) -> list[EmbeddingVector]:
    """One vector per unit, in input order, optionally L2-normalized."""
    if not units:
        raise ValueError("embed_units requires a non-empty unit list")
    unit_ids = [u.unit_id for u in units]
    if config.kind == "file":
        provider = FileEmbeddingProvider(config.path)
        rows = provider.lookup(unit_ids)
    else:
        provider = RemoteEmbeddingProvider(
            config.endpoint_url, config.model, timeout=config.timeout,
            max_retries=config.max_retries, backoff_base=config.backoff_base)
        texts = [unit_text(u) for u in units]
        rows = []
        for start in range(0, len(texts), config.batch_size):
            rows.extend(provider.embed(texts[start:start + config.batch_size]))
    return _finalize(unit_ids, rows, config.normalize)


# --- vector files ---------------------------------------------------------
#
# JSON-lines (interchange default): {"unit_id": ..., "values": [...]}
# Binary (compact): little-endian header (magic "OMVF", version u32, count u64,
# dim u32), then count*dim row-major float32 values, then the unit-id table
# (per row: u16 byte length + UTF-8 bytes).

_MAGIC = b"OMVF"
_VERSION = 1


def save_vectors(vectors: Sequence[EmbeddingVector], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimMismatch(f"cannot save mixed dimensions: {sorted(dims)}")
    if path.suffix == ".bin":
        dim = dims.pop() if dims else 0
        with path.open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<IQI", _VERSION, len(vectors), dim))
            for v in vectors:
                fh.write(struct.pack(f"<{dim}f", *v.values))
            for v in vectors:
                raw = v.unit_id.encode("utf-8")
                fh.write(struct.pack("<H", len(raw)))
                fh.write(raw)
    else:
        with path.open("w", encoding="utf-8") as fh:
            for v in vectors:
                fh.write(json.dumps({"unit_id": v.unit_id, "values": list(v.values)}))
                fh.write("\n")


def load_vectors(path: str | Path) -> list[EmbeddingVector]:
    path = Path(path)
    if path.suffix == ".bin":
        return _load_binary(path)
    vectors: list[EmbeddingVector] = []
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                vec = EmbeddingVector(str(obj["unit_id"]),
                                      tuple(float(x) for x in obj["values"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise VectorFormatError(f"{path}:{lineno}: bad vector record ({exc})") from exc
            if dim is None:
                dim = vec.dim
            elif vec.dim != dim:
                raise DimMismatch(f"{path}:{lineno}: dim {vec.dim} != {dim}")
            vectors.append(vec)
    return vectors


def _load_binary(path: Path) -> list[EmbeddingVector]:
    data = path.read_bytes()
    if len(data) == 0:
        return []
    header = struct.calcsize("<IQI") + len(_MAGIC)
    if len(data) < header or data[:4] != _MAGIC:
        raise VectorFormatError(f"{path}: bad magic at byte 0")
    version, count, dim = struct.unpack_from("<IQI", data, 4)
    if version != _VERSION:
        raise VectorFormatError(f"{path}: unsupported version {version}")
    offset = header
    need = count * dim * 4
    if len(data) < offset + need:
        raise VectorFormatError(f"{path}: truncated value block at byte {len(data)}")
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
    values = values.reshape(count, dim) if count else values.reshape(0, dim or 0)
    offset += need
    ids = []
    for _ in range(count):
        if len(data) < offset + 2:
            raise VectorFormatError(f"{path}: truncated id table at byte {offset}")
        (n,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + n:
            raise VectorFormatError(f"{path}: truncated id table at byte {offset}")
        ids.append(data[offset:offset + n].decode("utf-8"))
        offset += n
    return [EmbeddingVector(uid, tuple(float(x) for x in row))
            for uid, row in zip(ids, values)]


def as_matrix(vectors: Sequence[EmbeddingVector]) -> tuple[list[str], np.ndarray]:
    """Unit ids plus a float64 (n, dim) matrix, preserving order."""
    ids = [v.unit_id for v in vectors]
    if not vectors:
        return ids, np.zeros((0, 0))
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimMismatch(f"mixed dimensions: {sorted(dims)}")
    return ids, np.asarray([v.values for v in vectors], dtype=np.float64)
