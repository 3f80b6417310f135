"""Fit star ratings on topic-sentiment features and read the analyst outputs:
coefficient table with significance, cross-validated fit quality, the
topic-impact table, and the priority matrix.
"""

from opinionmine import (SyntheticSpec, TopicModelConfig, build_features,
                         build_topic_model, generate_synthetic, impact_table, kfold_cv,
                         ols_fit, priority_matrix)
from opinionmine.report import render_markdown

corpus = generate_synthetic(SyntheticSpec(topics=6, reviews=1200, dim=24, seed=21))
model = build_topic_model(
    corpus.units, corpus.vectors,
    TopicModelConfig(k=12, min_cluster_size=40, reduced_dim=6, seed=0, method="m3"))

features = build_features(corpus.reviews, corpus.units, model, "with_sentiment")
fit = ols_fit(features)
cv = kfold_cv(features, k=5, seed=1)

print(f"n = {fit.n} reviews, {len(fit.coefficients)} topic coefficients, "
      f"df = {fit.df}")
print(f"Training R2 {fit.r2:.3f}; cross-validated R2 {cv.mean_r2:.3f} "
      f"(folds: {[f'{v:.3f}' for v in cv.fold_r2]})")
print(f"RMSE {cv.mean_rmse:.3f}; significant coefficients at p<.05: "
      f"{len(fit.significant_topics())}/{len(fit.coefficients)}")

print("\nPer-topic coefficients (planted truth in parentheses):")
from opinionmine.evaluation import match_topics
mapping = match_topics(model, corpus)
for topic_id in sorted(fit.coefficients):
    beta = fit.coefficients[topic_id]
    p = fit.p_values[topic_id]
    planted = corpus.beta[mapping[topic_id]]
    print(f"  topic {topic_id}: beta {beta:+.3f} (p={p:.4f})   planted {planted:+.3f}")

rows = impact_table(model, fit, corpus.units)
matrix = priority_matrix(rows)
print("\n" + render_markdown(rows, matrix))
