"""Content-addressed artifact store shared by the CLI and the HTTP service.

Layout under one data directory:

    corpora/{corpus_id}/reviews.jsonl
    corpora/{corpus_id}/units.jsonl + units.meta.json
    corpora/{corpus_id}/vectors.jsonl + vectors.meta.json
    models/{model_id}/   (config.json, assignments.jsonl, topics.json)
    fits/{fit_id}.json
    jobs/{job_id}.json

Ids are prefixes of SHA-256 over content (corpora) or canonical config JSON
(models, fits), so identical inputs land on the same artifact and finished
artifacts are never rewritten.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import topics as topics_mod
from .corpus import Review, load_reviews, load_units, loads_reviews
from .topics import TopicModel, TopicModelConfig


class UnknownArtifact(KeyError):
    pass


class CorpusLocked(RuntimeError):
    """The corpus already feeds models; derived artifacts cannot change."""


def content_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def config_id(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("corpora", "models", "fits", "jobs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # --- corpora -----------------------------------------------------------

    def add_corpus(self, reviews_jsonl: bytes) -> str:
        loads_reviews(reviews_jsonl.decode("utf-8"), source="<upload>")
        corpus_id = content_id(reviews_jsonl)
        directory = self.root / "corpora" / corpus_id
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "reviews.jsonl"
        if not path.exists():
            path.write_bytes(reviews_jsonl)
        return corpus_id

    def corpus_dir(self, corpus_id: str) -> Path:
        directory = self.root / "corpora" / corpus_id
        if not directory.exists():
            raise UnknownArtifact(f"no corpus {corpus_id}")
        return directory

    def reviews(self, corpus_id: str) -> list[Review]:
        return load_reviews(self.corpus_dir(corpus_id) / "reviews.jsonl")

    def corpus_has_models(self, corpus_id: str) -> bool:
        for model_dir in (self.root / "models").iterdir():
            meta = model_dir / "meta.json"
            if meta.exists() and json.loads(meta.read_text())["corpus_id"] == corpus_id:
                return True
        return False

    def derived_meta(self, corpus_id: str, kind: str) -> dict | None:
        path = self.corpus_dir(corpus_id) / f"{kind}.meta.json"
        return json.loads(path.read_text(encoding="utf-8")) if path.exists() else None

    def check_derived_config(self, corpus_id: str, kind: str, config_hash: str) -> bool:
        """True when the derived artifact already exists with this config.

        Raises CorpusLocked when it exists with a different config and the
        corpus already feeds models (replacing it would invalidate them).
        """
        meta = self.derived_meta(corpus_id, kind)
        if meta is None:
            return False
        if meta["config_hash"] == config_hash:
            return True
        if self.corpus_has_models(corpus_id):
            raise CorpusLocked(
                f"corpus {corpus_id} already has models built on its {kind}; "
                "submit a fresh corpus to change the configuration")
        return False

    def write_derived_meta(self, corpus_id: str, kind: str, config_hash: str,
                           extra: dict | None = None) -> None:
        doc = {"config_hash": config_hash}
        if extra:
            doc.update(extra)
        path = self.corpus_dir(corpus_id) / f"{kind}.meta.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def units_path(self, corpus_id: str) -> Path:
        return self.corpus_dir(corpus_id) / "units.jsonl"

    def vectors_path(self, corpus_id: str) -> Path:
        return self.corpus_dir(corpus_id) / "vectors.jsonl"

    def units(self, corpus_id: str):
        path = self.units_path(corpus_id)
        if not path.exists():
            raise UnknownArtifact(f"corpus {corpus_id} has no extracted units yet")
        return load_units(path)

    # --- models ------------------------------------------------------------

    def model_id_for(self, corpus_id: str, config: TopicModelConfig) -> str:
        return config_id({"corpus_id": corpus_id, "config": config.to_dict()})

    def model_dir(self, model_id: str) -> Path:
        return self.root / "models" / model_id

    def has_model(self, model_id: str) -> bool:
        return (self.model_dir(model_id) / "config.json").exists()

    def save_model(self, model_id: str, corpus_id: str, model: TopicModel) -> None:
        directory = self.model_dir(model_id)
        if (directory / "config.json").exists():
            return  # immutable; identical config produced it
        topics_mod.save_model(model, directory)
        (directory / "meta.json").write_text(
            json.dumps({"corpus_id": corpus_id, "model_id": model_id},
                       indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def load_model(self, model_id: str) -> TopicModel:
        if not self.has_model(model_id):
            raise UnknownArtifact(f"no model {model_id}")
        return topics_mod.load_model(self.model_dir(model_id))

    def model_corpus(self, model_id: str) -> str:
        meta = self.model_dir(model_id) / "meta.json"
        if not meta.exists():
            raise UnknownArtifact(f"no model {model_id}")
        return json.loads(meta.read_text(encoding="utf-8"))["corpus_id"]

    # --- fits --------------------------------------------------------------

    def fit_id_for(self, model_id: str, payload: dict) -> str:
        return config_id({"model_id": model_id, **payload})

    def fit_path(self, fit_id: str) -> Path:
        return self.root / "fits" / f"{fit_id}.json"

    def save_fit(self, fit_id: str, document: dict) -> None:
        path = self.fit_path(fit_id)
        if path.exists():
            return
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")

    def load_fit(self, fit_id: str) -> dict:
        path = self.fit_path(fit_id)
        if not path.exists():
            raise UnknownArtifact(f"no fit {fit_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    def fits_for_model(self, model_id: str) -> list[str]:
        out = []
        for path in sorted((self.root / "fits").glob("*.json")):
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("model_id") == model_id:
                out.append(path.stem)
        return out

    # --- jobs --------------------------------------------------------------

    def save_job(self, record: dict) -> None:
        path = self.root / "jobs" / f"{record['job_id']}.json"
        path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")

    def load_job(self, job_id: str) -> dict:
        path = self.root / "jobs" / f"{job_id}.json"
        if not path.exists():
            raise UnknownArtifact(f"no job {job_id}")
        return json.loads(path.read_text(encoding="utf-8"))
