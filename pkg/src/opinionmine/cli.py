"""Command-line interface: one subcommand per pipeline stage.

Every subcommand accepts --seed (commands without randomness ignore it) and
exits 0 on success, nonzero with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import load_reviews, load_units, save_reviews, save_units
from .embedding import ProviderConfig, embed_units, load_vectors, save_vectors
from .evaluation import (SyntheticSpec, generate_synthetic, load_annotations,
                         precision_report, sample_for_annotation)
from .extraction import ExtractionConfig, extract_corpus
from .regression import build_features, fit_document, kfold_cv, ols_fit
from .report import impact_table, priority_matrix, render_csv, render_json, render_markdown
from .topics import TopicModelConfig, build_topic_model, load_model, save_model


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def cmd_extract(args: argparse.Namespace) -> int:
    reviews = load_reviews(args.reviews)
    config = ExtractionConfig(
        endpoint_url=args.endpoint, model=args.model, api_key_env=args.api_key_env,
        max_retries=args.max_retries, backoff_base=args.backoff_base,
        cache_dir=args.cache_dir, overall_label=args.overall_label,
        parallelism=args.parallelism)
    result = extract_corpus(reviews, config)
    save_units(result.units, args.out)
    stats = dataclasses.asdict(result.stats)
    stats["failures"] = result.failures
    if args.stats_out:
        _write(args.stats_out, json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(f"extracted {result.stats.units_kept} units from "
          f"{result.stats.reviews_total - result.stats.reviews_failed} reviews "
          f"(mean {result.stats.mean_units_per_review:.2f}/review, "
          f"{result.stats.reviews_failed} failed)")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    units = load_units(args.units)
    config = ProviderConfig(endpoint_url=args.endpoint, model=args.model,
                            path=args.vectors_file, normalize=not args.no_normalize,
                            batch_size=args.batch_size)
    vectors = embed_units(units, config)
    save_vectors(vectors, args.out)
    print(f"embedded {len(vectors)} units at dim {vectors[0].dim if vectors else 0}")
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    units = load_units(args.units)
    vectors = load_vectors(args.vectors)
    config = TopicModelConfig(k=args.k, min_cluster_size=args.min_cluster_size,
                              min_samples=args.min_samples, reduced_dim=args.reduced_dim,
                              seed=args.seed, method=args.method, split_k=args.split_k)
    model = build_topic_model(units, vectors, config)
    save_model(model, args.out)
    print(f"model {model.config_hash}: {len(model.topics)} topics, "
          f"outlier rate {model.outlier_rate():.3f} -> {args.out}")
    return 0


def cmd_regress(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    reviews = load_reviews(args.reviews)
    units = load_units(args.units)
    mode = "without_sentiment" if args.without_sentiment else "with_sentiment"
    features = build_features(reviews, units, model, mode)
    fit = ols_fit(features)
    cv = kfold_cv(features, k=args.folds, seed=args.seed)
    doc = fit_document(fit, cv, model.config_hash, mode)
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"fit: training R2 {fit.r2:.3f}, CV mean R2 {cv.mean_r2:.3f}, "
          f"RMSE {cv.mean_rmse:.3f}, {len(fit.significant_topics())} significant topics")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    units = load_units(args.units)
    if args.export_sample:
        workbook = sample_for_annotation(model, units, per_topic=args.per_topic,
                                         overlap=args.overlap, evaluators=args.evaluators,
                                         seed=args.seed)
        workbook.write_csv(args.export_sample)
        print(f"wrote annotation sample for {len(set(r['topic_id'] for r in workbook.rows))} "
              f"topics to {args.export_sample}")
        if workbook.flagged_topics:
            for topic, reason in sorted(workbook.flagged_topics.items()):
                print(f"  note: topic {topic}: {reason}", file=sys.stderr)
        return 0
    records = load_annotations(args.annotations) if args.annotations else None
    rep = precision_report(model, units, records, pooled=args.pooled)
    doc = {
        "sentiment_precision": rep.sentiment_precision,
        "mean_sentiment_precision": rep.mean_sentiment_precision,
        "topic_precision": rep.topic_precision,
        "mean_topic_precision": rep.mean_topic_precision,
        "share_topics_at_90": rep.share_topics_at_90,
        "outlier_rate": rep.outlier_rate,
        "inter_rater_agreement": rep.inter_rater,
    }
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    units = load_units(args.units)
    from .service import _fit_from_document
    fit = _fit_from_document(json.loads(Path(args.fit).read_text(encoding="utf-8")))
    rows = impact_table(model, fit, units)
    matrix = priority_matrix(rows) if any(r.significant for r in rows) else None
    if args.format == "json":
        text = render_json(rows, matrix)
    elif args.format == "csv":
        text = render_csv(rows)
    elif args.format in ("md", "markdown"):
        text = render_markdown(rows, matrix)
    else:
        raise ValueError(f"unknown format {args.format!r}")
    _write(args.out, text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(topics=args.topics, reviews=args.reviews,
                         units_per_review_mean=args.units_per_review, dim=args.dim,
                         centroid_separation=args.separation, jitter=args.jitter,
                         noise_sigma=args.noise_sigma, seed=args.seed)
    corpus = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_reviews(corpus.reviews, out / "reviews.jsonl")
    save_units(corpus.units, out / "units.jsonl")
    save_vectors(corpus.vectors, out / "vectors.jsonl")
    truth = {
        "spec": dataclasses.asdict(spec),
        "beta0": corpus.beta0,
        "beta": list(corpus.beta),
        "polarities": corpus.polarities,
        "true_topics": corpus.true_topics,
        "signal": [float(x) for x in corpus.signal],
        "y_linear": [float(x) for x in corpus.y_linear],
        "stars": [int(x) for x in corpus.stars],
        "analytic_r2": corpus.analytic_r2(),
    }
    (out / "ground_truth.json").write_text(
        json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"synthetic corpus: {len(corpus.reviews)} reviews, {len(corpus.units)} units, "
          f"analytic R2 {corpus.analytic_r2():.3f} -> {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(args.data_dir, workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opinionmine",
                                     description="opinion-unit topic and impact analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="turn reviews into opinion units via an LLM endpoint")
    p.add_argument("--reviews", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", required=True, help="chat-completion endpoint URL")
    p.add_argument("--model", default="")
    p.add_argument("--api-key-env", default="OPINIONMINE_API_KEY")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--backoff-base", type=float, default=0.5)
    p.add_argument("--overall-label", default="overall experience")
    p.add_argument("--stats-out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("embed", help="produce one vector per unit")
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vectors-file", default="", help="precomputed vectors (file provider)")
    p.add_argument("--endpoint", default="", help="embeddings endpoint URL (remote provider)")
    p.add_argument("--model", default="")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="build a topic model from unit vectors")
    p.add_argument("--units", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True, help="model directory")
    p.add_argument("--method", choices=("m1", "m2", "m3"), default="m1")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--min-cluster-size", type=int, default=50)
    p.add_argument("--min-samples", type=int, default=None)
    p.add_argument("--reduced-dim", type=int, default=5)
    p.add_argument("--split-k", type=int, default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("regress", help="fit star ratings on topic features")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--reviews", required=True)
    p.add_argument("--units", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--without-sentiment", action="store_true",
                   help="0/1 mention indicators instead of mean sentiment")
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("evaluate", help="cluster-quality metrics and annotation samples")
    p.add_argument("--model", required=True)
    p.add_argument("--units", required=True)
    p.add_argument("--annotations", default=None, help="filled workbook CSV")
    p.add_argument("--pooled", action="store_true",
                   help="pool counts across evaluators instead of averaging")
    p.add_argument("--export-sample", default=None, help="write an annotation workbook CSV")
    p.add_argument("--per-topic", type=int, default=20)
    p.add_argument("--overlap", type=int, default=5)
    p.add_argument("--evaluators", type=int, default=3)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="impact table and priority matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--fit", required=True, help="fit artifact JSON")
    p.add_argument("--units", required=True)
    p.add_argument("--format", choices=("md", "markdown", "csv", "json"), default="md")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a planted synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--reviews", type=int, default=500)
    p.add_argument("--topics", type=int, default=6)
    p.add_argument("--units-per-review", type=float, default=5.65)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--jitter", type=float, default=0.08)
    p.add_argument("--noise-sigma", type=float, default=0.45)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--workers", type=int, default=2)
    p.set_defaults(func=cmd_serve)

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=0,
                        help="RNG seed (ignored by deterministic commands)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
