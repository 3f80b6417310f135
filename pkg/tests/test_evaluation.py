import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from conftest import make_unit
from opinionmine.density import hdbscan
from opinionmine.evaluation import (AnnotationError, AnnotationRecord, InfeasibleGeometry,
                                    SyntheticSpec, generate_synthetic,
                                    inter_rater_agreement, load_annotations, match_topics,
                                    precision_report, sample_for_annotation,
                                    sentiment_precision, topic_precision)
from opinionmine.topics import TopicModelConfig, build_topic_model


class TestSentimentPrecision:
    def test_eighteen_of_twenty_positive_is_090(self):
        units = [make_unit(f"u{i}", 8) for i in range(18)] + \
            [make_unit("u18", 3), make_unit("u19", 2)]
        assert sentiment_precision(units) == pytest.approx(0.90)

    def test_unanimous_negative_is_one(self):
        units = [make_unit(f"u{i}", s) for i, s in enumerate([1, 2, 3, 4, 5])]
        assert sentiment_precision(units) == 1.0

    def test_even_split_is_half(self):
        units = [make_unit(f"u{i}", 8) for i in range(10)] + \
            [make_unit(f"v{i}", 2) for i in range(10)]
        assert sentiment_precision(units) == 0.5

    def test_never_below_half_property(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            scores = rng.integers(1, 11, size=rng.integers(1, 30))
            units = [make_unit(f"u{i}", int(s)) for i, s in enumerate(scores)]
            assert sentiment_precision(units) >= 0.5

    def test_boundary_score_five_counts_negative(self):
        units = [make_unit("u0", 5), make_unit("u1", 5), make_unit("u2", 6)]
        assert sentiment_precision(units) == pytest.approx(2 / 3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sentiment_precision([])


def record(evaluator, sampled, errors, topic_id=0):
    return AnnotationRecord(evaluator_id=evaluator, topic_id=topic_id, topic_name="",
                            sampled_unit_ids=list(sampled), error_unit_ids=list(errors))


class TestTopicPrecision:
    def test_twenty_sampled_two_errors(self):
        rec = record("e1", [f"u{i}" for i in range(20)], ["u3", "u7"])
        assert topic_precision([rec]) == pytest.approx(0.90)

    def test_mean_over_evaluators(self):
        r1 = record("e1", [f"u{i}" for i in range(10)], ["u0"])      # 0.9
        r2 = record("e2", [f"u{i}" for i in range(10)], ["u0", "u1"])  # 0.8
        assert topic_precision([r1, r2]) == pytest.approx(0.85)

    def test_empty_error_list_is_one(self):
        rec = record("e1", ["u1", "u2"], [])
        assert topic_precision([rec]) == 1.0

    def test_pooled_aggregation_option(self):
        r1 = record("e1", [f"u{i}" for i in range(10)], ["u0"])
        r2 = record("e2", [f"u{i}" for i in range(20)], [])
        assert topic_precision([r1, r2]) == pytest.approx((0.9 + 1.0) / 2)
        assert topic_precision([r1, r2], pooled=True) == pytest.approx(29 / 30)

    def test_error_outside_sample_names_record(self):
        with pytest.raises(AnnotationError, match="evaluator 'e9'"):
            record("e9", ["u1"], ["u2"])

    def test_permutation_invariance(self):
        ids = [f"u{i}" for i in range(12)]
        rec_f = record("e1", ids, ["u2", "u5"])
        rec_r = record("e1", ids[::-1], ["u5", "u2"])
        assert topic_precision([rec_f]) == topic_precision([rec_r])


class TestInterRaterAgreement:
    def test_unanimous_on_sixty(self):
        ids = [f"u{i}" for i in range(60)]
        records = [record(e, ids, ["u1", "u2"]) for e in ("e1", "e2", "e3")]
        assert inter_rater_agreement(records) == 1.0

    def test_three_evaluators_agree_on_18_of_20(self):
        # enumerated fixture: unanimous everywhere except u0 and u1
        ids = [f"u{i}" for i in range(20)]
        r1 = record("e1", ids, ["u0", "u5", "u6"])
        r2 = record("e2", ids, ["u5", "u6"])            # disagrees on u0
        r3 = record("e3", ids, ["u1", "u5", "u6"])      # disagrees on u1
        unanimous = 0
        for uid in ids:
            judgments = {uid in r.error_unit_ids for r in (r1, r2, r3)}
            unanimous += len(judgments) == 1
        assert unanimous == 18
        assert inter_rater_agreement([r1, r2, r3]) == pytest.approx(18 / 20)

    def test_complementary_judgments_zero(self):
        ids = ["u1", "u2", "u3"]
        r1 = record("e1", ids, ["u1", "u3"])
        r2 = record("e2", ids, ["u2"])
        assert inter_rater_agreement([r1, r2]) == 0.0

    def test_explicit_overlap_missing_judgment_raises(self):
        r1 = record("e1", ["u1", "u2"], [])
        r2 = record("e2", ["u1"], [])
        with pytest.raises(AnnotationError, match="no judgment"):
            inter_rater_agreement([r1, r2], overlap_ids={0: ["u1", "u2"]})

    def test_pooled_across_topics(self):
        a1 = record("e1", ["u1", "u2"], [], topic_id=0)
        a2 = record("e2", ["u1", "u2"], [], topic_id=0)
        b1 = record("e1", ["v1", "v2"], ["v1"], topic_id=1)
        b2 = record("e2", ["v1", "v2"], [], topic_id=1)
        assert inter_rater_agreement([a1, a2, b1, b2]) == pytest.approx(3 / 4)


@pytest.fixture(scope="module")
def clustered_corpus():
    spec = SyntheticSpec(topics=4, reviews=260, dim=16, seed=1)
    corpus = generate_synthetic(spec)
    config = TopicModelConfig(k=4, min_cluster_size=30, reduced_dim=4, method="m1")
    model = build_topic_model(corpus.units, corpus.vectors, config)
    return corpus, model


class TestSampleForAnnotation:
    def test_overlap_shared_exactly(self, clustered_corpus):
        corpus, model = clustered_corpus
        workbook = sample_for_annotation(model, corpus.units, per_topic=20, overlap=5,
                                         evaluators=3, seed=0)
        per_eval: dict = {}
        for row in workbook.rows:
            per_eval.setdefault(row["topic_id"], {}).setdefault(
                row["evaluator_id"], set()).add(row["unit_id"])
        for topic_id, samples in per_eval.items():
            assert len(samples) == 3
            for s in samples.values():
                assert len(s) == 20
            shared = set.intersection(*samples.values())
            assert len(shared) == 5
        assert workbook.overlap_ids() == {t: sorted(set.intersection(*s.values()))
                                          for t, s in per_eval.items()}

    def test_same_seed_identical_workbook(self, clustered_corpus):
        corpus, model = clustered_corpus
        a = sample_for_annotation(model, corpus.units, seed=3)
        b = sample_for_annotation(model, corpus.units, seed=3)
        assert a.rows == b.rows

    def test_small_topic_sampled_exhaustively_with_flag(self):
        units = [make_unit(f"u{i}", 3) for i in range(12)]
        from opinionmine.topics import Topic, TopicModel, TopicModelConfig
        model = TopicModel(
            config=TopicModelConfig(k=1, min_cluster_size=2),
            config_hash="x",
            assignment={u.unit_id: 0 for u in units},
            topics=[Topic(topic_id=0, size=12, centroid=(0.0,), keywords=[],
                          polarity="unsplit", representative_unit_ids=[])])
        workbook = sample_for_annotation(model, units, per_topic=20, overlap=5,
                                         evaluators=2, seed=0)
        assert 0 in workbook.flagged_topics
        sampled = {row["unit_id"] for row in workbook.rows
                   if row["evaluator_id"] == "eval1"}
        assert sampled == {u.unit_id for u in units}

    def test_csv_roundtrip_into_records(self, tmp_path, clustered_corpus):
        corpus, model = clustered_corpus
        workbook = sample_for_annotation(model, corpus.units, per_topic=10, overlap=2,
                                         evaluators=2, seed=0)
        path = tmp_path / "workbook.csv"
        # simulate an annotator marking the first row of each evaluator an error
        seen = set()
        for row in workbook.rows:
            key = (row["topic_id"], row["evaluator_id"])
            if key not in seen:
                row["error"] = "x"
                row["topic_name"] = "food quality"
                seen.add(key)
        workbook.write_csv(path)
        records = load_annotations(path)
        assert len(records) == len(seen)
        for rec in records:
            assert len(rec.sampled_unit_ids) == 10
            assert len(rec.error_unit_ids) == 1
            assert rec.topic_name == "food quality"
        report = precision_report(model, corpus.units, records)
        assert report.mean_topic_precision == pytest.approx(0.9)
        assert report.inter_rater is not None


class TestGenerateSynthetic:
    def test_zero_jitter_vectors_equal_centroids(self):
        spec = SyntheticSpec(topics=3, reviews=60, dim=8, jitter=0.0, seed=0)
        corpus = generate_synthetic(spec)
        matrix = np.array([v.values for v in corpus.vectors])
        distinct = np.unique(np.round(matrix, 12), axis=0)
        assert len(distinct) == 3
        labels = hdbscan(matrix, min_cluster_size=5)
        assert adjusted_rand_score(
            [corpus.true_topics[u.unit_id] for u in corpus.units], labels) == 1.0

    def test_no_noise_no_rounding_beta_recovery(self):
        spec = SyntheticSpec(topics=6, reviews=900, dim=16, noise_sigma=0.0, seed=2)
        corpus = generate_synthetic(spec)
        x, y = corpus.true_features()
        design = np.column_stack([np.ones(len(y)), x])
        beta = np.linalg.lstsq(design, y, rcond=None)[0]
        assert beta[0] == pytest.approx(corpus.beta0, abs=1e-6)
        assert np.allclose(beta[1:], corpus.beta, atol=1e-6)

    def test_mean_units_per_review_lln(self):
        spec = SyntheticSpec(topics=8, reviews=5000, dim=16, seed=3)
        corpus = generate_synthetic(spec)
        assert abs(len(corpus.units) / len(corpus.reviews) - 5.65) < 0.2

    def test_sentiments_respect_polarity(self):
        corpus = generate_synthetic(SyntheticSpec(topics=4, reviews=100, dim=8, seed=4))
        for unit in corpus.units:
            topic = corpus.true_topics[unit.unit_id]
            if corpus.polarities[topic] == "negative":
                assert 1 <= unit.sentiment <= 5
            else:
                assert 6 <= unit.sentiment <= 10

    def test_stars_in_range_and_deterministic(self):
        spec = SyntheticSpec(topics=4, reviews=150, dim=8, seed=5)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert all(1 <= r.stars <= 5 for r in a.reviews)
        assert a.reviews == b.reviews
        assert a.units == b.units
        assert a.vectors == b.vectors

    def test_infeasible_geometry_rejected(self):
        with pytest.raises(InfeasibleGeometry):
            generate_synthetic(SyntheticSpec(topics=10, reviews=10, dim=4))

    def test_separation_dial(self):
        spec = SyntheticSpec(topics=3, reviews=50, dim=8, centroid_separation=0.5,
                             jitter=0.0, seed=6)
        corpus = generate_synthetic(spec)
        matrix = np.unique(np.round([v.values for v in corpus.vectors], 9), axis=0)
        gram = matrix @ matrix.T
        off_diag = gram[~np.eye(len(gram), dtype=bool)]
        assert np.allclose(off_diag, 0.5, atol=1e-6)

    def test_match_topics_roundtrip(self):
        corpus = generate_synthetic(SyntheticSpec(topics=4, reviews=260, dim=16, seed=7))
        model = build_topic_model(
            corpus.units, corpus.vectors,
            TopicModelConfig(k=4, min_cluster_size=30, reduced_dim=4, method="m1"))
        mapping = match_topics(model, corpus)
        assert sorted(mapping.values()) == [0, 1, 2, 3]

    def test_full_pipeline_recovers_beta_on_noiseless_data(self):
        # zero jitter, zero noise, unrounded target: cluster -> features -> OLS
        # must reproduce the planted coefficients exactly
        from opinionmine.regression import FeatureMatrix, kfold_cv, ols_fit, build_features
        corpus = generate_synthetic(SyntheticSpec(topics=6, reviews=600, dim=16,
                                                  jitter=0.0, noise_sigma=0.0, seed=8))
        model = build_topic_model(
            corpus.units, corpus.vectors,
            TopicModelConfig(k=12, min_cluster_size=20, reduced_dim=6, method="m3"))
        features = build_features(corpus.reviews, corpus.units, model, "with_sentiment")
        linear = FeatureMatrix(x=features.x, y=corpus.y_linear.copy(),
                               topic_ids=features.topic_ids,
                               review_ids=features.review_ids, mode=features.mode)
        fit = ols_fit(linear)
        mapping = match_topics(model, corpus)
        assert sorted(mapping.values()) == list(range(6))
        assert fit.intercept == pytest.approx(corpus.beta0, abs=1e-6)
        for model_topic, planted in mapping.items():
            assert fit.coefficients[model_topic] == pytest.approx(
                corpus.beta[planted], abs=1e-6)
        cv = kfold_cv(linear, k=5, seed=0)
        assert cv.mean_r2 == pytest.approx(1.0, abs=1e-9)
