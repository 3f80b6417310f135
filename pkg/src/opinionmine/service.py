"""HTTP service over the artifact store for iterative exploration.

Long-running work (extract, embed, cluster, regress) runs as asynchronous
jobs on a bounded worker pool; callers poll GET /jobs/{id}. Artifacts are
content-addressed and immutable: resubmitting an identical configuration
returns the already-computed artifact without recompute.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .corpus import CorpusFormatError, save_units, unit_text
from .embedding import ProviderConfig, embed_units, load_vectors, save_vectors
from .evaluation import sample_for_annotation, sentiment_precision
from .extraction import ExtractionConfig, extract_corpus
from .regression import build_features, fit_document, kfold_cv, ols_fit
from .report import impact_table, priority_matrix, render_csv, render_json, render_markdown
from .store import ArtifactStore, CorpusLocked, UnknownArtifact, config_id
from .topics import OUTLIER, TopicModelConfig, build_topic_model

logger = logging.getLogger(__name__)


class ExtractRequest(BaseModel):
    endpoint_url: str
    model: str = ""
    api_key_env: str = "OPINIONMINE_API_KEY"
    max_retries: int = Field(default=3, ge=0)
    backoff_base: float = Field(default=0.5, ge=0)
    parallelism: int = Field(default=4, ge=1)
    overall_label: str = "overall experience"


class EmbedRequest(BaseModel):
    path: str = ""
    endpoint_url: str = ""
    model: str = ""
    normalize: bool = True
    batch_size: int = Field(default=64, ge=1)


class ModelRequest(BaseModel):
    method: str = "m1"
    k: int = 20
    min_cluster_size: int = 50
    min_samples: int | None = None
    reduced_dim: int = 5
    seed: int = 0
    split_k: int | None = None


class RegressRequest(BaseModel):
    with_sentiment: bool = True
    folds: int = Field(default=5, ge=2)
    seed: int = 0


class JobEngine:
    """Deduplicating job runner: one execution per (kind, config) identity."""

    def __init__(self, store: ArtifactStore, workers: int = 2):
        self.store = store
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.lock = threading.Lock()
        self.records: dict[str, dict] = {}
        for path in (store.root / "jobs").glob("*.json"):
            record = store.load_job(path.stem)
            if record["status"] in ("queued", "running"):
                record["status"] = "failed"
                record["error"] = "interrupted by service restart"
                store.save_job(record)
            self.records[record["job_id"]] = record

    def submit(self, kind: str, identity: str, artifact_id: str,
               fn: Callable[[], None]) -> dict:
        job_id = f"{kind}-{identity}"
        with self.lock:
            existing = self.records.get(job_id)
            if existing is not None and existing["status"] != "failed":
                return existing
            record = {"job_id": job_id, "kind": kind, "status": "queued",
                      "config_hash": identity, "artifact": artifact_id, "error": None}
            self.records[job_id] = record
            self.store.save_job(record)

        def run() -> None:
            self._transition(job_id, "running")
            try:
                fn()
            except Exception as exc:  # stored on the record for the poller
                logger.exception("job %s failed", job_id)
                self._transition(job_id, "failed", error=f"{type(exc).__name__}: {exc}")
            else:
                self._transition(job_id, "done")

        self.pool.submit(run)
        return record

    def _transition(self, job_id: str, status: str, error: str | None = None) -> None:
        with self.lock:
            record = self.records[job_id]
            record["status"] = status
            record["error"] = error
            self.store.save_job(record)

    def get(self, job_id: str) -> dict:
        with self.lock:
            if job_id not in self.records:
                raise UnknownArtifact(f"no job {job_id}")
            return dict(self.records[job_id])


def create_app(data_dir: str | Path, workers: int = 2) -> FastAPI:
    store = ArtifactStore(data_dir)
    engine = JobEngine(store, workers=workers)
    app = FastAPI(title="opinionmine service")

    def fail(status: int, message: str) -> HTTPException:
        return HTTPException(status_code=status, detail=message)

    @app.exception_handler(UnknownArtifact)
    async def _unknown(_req: Request, exc: UnknownArtifact) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.post("/corpora")
    async def post_corpus(request: Request) -> dict:
        body = await request.body()
        try:
            corpus_id = store.add_corpus(body)
        except (CorpusFormatError, UnicodeDecodeError) as exc:
            raise fail(422, f"invalid reviews JSONL: {exc}")
        return {"corpus_id": corpus_id}

    @app.post("/corpora/{corpus_id}/extract")
    def post_extract(corpus_id: str, req: ExtractRequest) -> dict:
        reviews = _get_reviews(corpus_id)
        semantic = {"endpoint_url": req.endpoint_url, "model": req.model,
                    "overall_label": req.overall_label}
        identity = config_id({"corpus_id": corpus_id, "kind": "extract", **semantic})
        try:
            if store.check_derived_config(corpus_id, "units", identity):
                return _completed_job(engine, "extract", identity, corpus_id)
        except CorpusLocked as exc:
            raise fail(409, str(exc))

        def run() -> None:
            config = ExtractionConfig(
                endpoint_url=req.endpoint_url, model=req.model,
                api_key_env=req.api_key_env, max_retries=req.max_retries,
                backoff_base=req.backoff_base, parallelism=req.parallelism,
                overall_label=req.overall_label,
                cache_dir=str(store.corpus_dir(corpus_id) / "llm_cache"))
            result = extract_corpus(reviews, config)
            save_units(result.units, store.units_path(corpus_id))
            store.write_derived_meta(corpus_id, "units", identity, {
                "stats": result.stats.__dict__, "failures": result.failures})

        return dict(engine.submit("extract", identity, corpus_id, run))

    @app.post("/corpora/{corpus_id}/embed")
    def post_embed(corpus_id: str, req: EmbedRequest) -> dict:
        _get_reviews(corpus_id)
        semantic = {"path": req.path, "endpoint_url": req.endpoint_url,
                    "model": req.model, "normalize": req.normalize}
        identity = config_id({"corpus_id": corpus_id, "kind": "embed", **semantic})
        try:
            if store.check_derived_config(corpus_id, "vectors", identity):
                return _completed_job(engine, "embed", identity, corpus_id)
        except CorpusLocked as exc:
            raise fail(409, str(exc))
        try:
            provider = ProviderConfig(endpoint_url=req.endpoint_url, model=req.model,
                                      path=req.path, normalize=req.normalize,
                                      batch_size=req.batch_size)
        except ValueError as exc:
            raise fail(422, str(exc))

        def run() -> None:
            units = store.units(corpus_id)
            vectors = embed_units(units, provider)
            save_vectors(vectors, store.vectors_path(corpus_id))
            store.write_derived_meta(corpus_id, "vectors", identity,
                                     {"dim": vectors[0].dim if vectors else 0})

        return dict(engine.submit("embed", identity, corpus_id, run))

    @app.post("/corpora/{corpus_id}/models")
    def post_model(corpus_id: str, req: ModelRequest) -> dict:
        _get_reviews(corpus_id)
        try:
            config = TopicModelConfig(k=req.k, min_cluster_size=req.min_cluster_size,
                                      min_samples=req.min_samples,
                                      reduced_dim=req.reduced_dim, seed=req.seed,
                                      method=req.method, split_k=req.split_k)
        except ValueError as exc:
            raise fail(422, str(exc))
        model_id = store.model_id_for(corpus_id, config)
        if store.has_model(model_id):
            return _completed_job(engine, "model", model_id, model_id)

        def run() -> None:
            units = store.units(corpus_id)
            vectors = load_vectors(store.vectors_path(corpus_id))
            model = build_topic_model(units, vectors, config, corpus_key=corpus_id)
            store.save_model(model_id, corpus_id, model)

        record = dict(engine.submit("model", model_id, model_id, run))
        record["model_id"] = model_id
        return record

    @app.get("/models/{model_id}/topics")
    def get_topics(model_id: str) -> dict:
        model = store.load_model(model_id)
        corpus_id = store.model_corpus(model_id)
        units = store.units(corpus_id)
        unit_by_id = {u.unit_id: u for u in units}
        members: dict[int, list] = {}
        for u in units:
            t = model.assignment.get(u.unit_id, OUTLIER)
            if t != OUTLIER:
                members.setdefault(t, []).append(u)
        topic_docs = []
        for topic in model.topics:
            rep = topic.representative_unit_ids[0] if topic.representative_unit_ids else None
            topic_docs.append({
                "topic_id": topic.topic_id,
                "size": topic.size,
                "polarity": topic.polarity,
                "keywords": topic.keywords,
                "sentiment_precision": sentiment_precision(members[topic.topic_id]),
                "example": unit_text(unit_by_id[rep]) if rep in unit_by_id else "",
            })
        return {"model_id": model_id, "config": model.config.to_dict(),
                "config_hash": model.config_hash, "method": model.method,
                "outlier_rate": model.outlier_rate(), "topics": topic_docs}

    @app.get("/models/{model_id}/topics/{topic_id}/units")
    def get_topic_units(model_id: str, topic_id: int, limit: int = 20) -> dict:
        model = store.load_model(model_id)
        corpus_id = store.model_corpus(model_id)
        units = store.units(corpus_id)
        try:
            topic = model.topic_by_id(topic_id)
        except KeyError as exc:
            raise fail(404, str(exc))
        members = [u for u in units if model.assignment.get(u.unit_id) == topic_id]
        rep_rank = {uid: i for i, uid in enumerate(topic.representative_unit_ids)}
        members.sort(key=lambda u: (rep_rank.get(u.unit_id, len(rep_rank)), u.unit_id))
        page = members[:max(0, limit)]
        return {"model_id": model_id, "topic_id": topic_id, "total": len(members),
                "units": [{"unit_id": u.unit_id, "review_id": u.review_id,
                           "label": u.label, "excerpt": u.excerpt,
                           "sentiment": u.sentiment} for u in page]}

    @app.post("/models/{model_id}/regress")
    def post_regress(model_id: str, req: RegressRequest) -> dict:
        if not store.has_model(model_id):
            raise fail(404, f"no model {model_id}")
        payload = {"with_sentiment": req.with_sentiment, "folds": req.folds,
                   "seed": req.seed}
        fit_id = store.fit_id_for(model_id, payload)
        if store.fit_path(fit_id).exists():
            return _completed_job(engine, "regress", fit_id, fit_id)

        def run() -> None:
            model = store.load_model(model_id)
            corpus_id = store.model_corpus(model_id)
            reviews = store.reviews(corpus_id)
            units = store.units(corpus_id)
            mode = "with_sentiment" if req.with_sentiment else "without_sentiment"
            features = build_features(reviews, units, model, mode)
            fit = ols_fit(features)
            cv = kfold_cv(features, k=req.folds, seed=req.seed)
            doc = fit_document(fit, cv, model.config_hash, mode)
            doc["model_id"] = model_id
            doc["fit_id"] = fit_id
            store.save_fit(fit_id, doc)

        record = dict(engine.submit("regress", fit_id, fit_id, run))
        record["fit_id"] = fit_id
        return record

    @app.get("/fits/{fit_id}")
    def get_fit(fit_id: str) -> dict:
        return store.load_fit(fit_id)

    @app.get("/models/{model_id}/report")
    def get_report(model_id: str, format: str = "json", fit_id: str | None = None):
        model = store.load_model(model_id)
        if fit_id is None:
            fits = store.fits_for_model(model_id)
            if not fits:
                raise fail(404, f"model {model_id} has no fits yet")
            if len(fits) > 1:
                raise fail(422, f"model {model_id} has {len(fits)} fits; pass fit_id")
            fit_id = fits[0]
        doc = store.load_fit(fit_id)
        corpus_id = store.model_corpus(model_id)
        units = store.units(corpus_id)
        fit = _fit_from_document(doc)
        rows = impact_table(model, fit, units)
        matrix = None
        if any(r.significant for r in rows):
            matrix = priority_matrix(rows)
        if format == "json":
            return Response(render_json(rows, matrix), media_type="application/json")
        if format == "csv":
            return Response(render_csv(rows), media_type="text/csv")
        if format in ("md", "markdown"):
            return Response(render_markdown(rows, matrix), media_type="text/markdown")
        raise fail(422, f"unknown format {format!r}")

    @app.get("/models/{model_id}/annotation-sample")
    def get_annotation_sample(model_id: str, per_topic: int = 20, overlap: int = 5,
                              evaluators: int = 3, seed: int = 0):
        model = store.load_model(model_id)
        corpus_id = store.model_corpus(model_id)
        units = store.units(corpus_id)
        try:
            workbook = sample_for_annotation(model, units, per_topic=per_topic,
                                             overlap=overlap, evaluators=evaluators,
                                             seed=seed)
        except ValueError as exc:
            raise fail(422, str(exc))
        import csv as _csv
        import io as _io
        buf = _io.StringIO()
        from .evaluation import WORKBOOK_COLUMNS
        writer = _csv.DictWriter(buf, fieldnames=WORKBOOK_COLUMNS)
        writer.writeheader()
        for row in workbook.rows:
            writer.writerow(row)
        return Response(buf.getvalue(), media_type="text/csv")

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        return engine.get(job_id)

    def _get_reviews(corpus_id: str):
        return store.reviews(corpus_id)

    app.state.store = store
    app.state.engine = engine
    return app


def _completed_job(engine: JobEngine, kind: str, identity: str, artifact_id: str) -> dict:
    record = engine.submit(kind, identity, artifact_id, lambda: None)
    extra_key = {"model": "model_id", "regress": "fit_id"}.get(kind)
    record = dict(record)
    if extra_key:
        record[extra_key] = artifact_id
    return record


def _fit_from_document(doc: dict):
    from .regression import RegressionFit
    coefficients = {c["topic_id"]: c["beta"] for c in doc["coefficients"]}
    return RegressionFit(
        intercept=doc["intercept"]["beta"],
        coefficients=coefficients,
        standard_errors={c["topic_id"]: c["se"] for c in doc["coefficients"]},
        t_statistics={c["topic_id"]: c["t"] for c in doc["coefficients"]},
        p_values={c["topic_id"]: c["p"] for c in doc["coefficients"]},
        intercept_se=doc["intercept"]["se"],
        intercept_t=doc["intercept"]["t"],
        intercept_p=doc["intercept"]["p"],
        dropped=list(doc["dropped_topics"]),
        n=doc["n"], df=doc["df"],
        r2=doc["training_r2"], rmse=doc["training_rmse"])
