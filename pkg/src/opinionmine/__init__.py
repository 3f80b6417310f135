"""Opinion-unit extraction, topic clustering, and star-rating impact analysis."""

from .corpus import OpinionUnit, Review, load_reviews, load_units, save_reviews, save_units
from .density import hdbscan
from .embedding import EmbeddingVector, ProviderConfig, embed_units, load_vectors, save_vectors
from .evaluation import (AnnotationRecord, SyntheticSpec, generate_synthetic,
                         inter_rater_agreement, sample_for_annotation,
                         sentiment_precision, topic_precision)
from .extraction import (ExtractionConfig, build_prompt, extract_corpus, filter_overall,
                         parse_extraction)
from .reduction import reduce_dims
from .regression import (CrossValReport, FeatureMatrix, RegressionFit, build_features,
                         kfold_cv, ols_fit, t_sf)
from .report import impact_table, priority_matrix
from .topics import (Topic, TopicModel, TopicModelConfig, build_topic_model, load_model,
                     reduce_topics, save_model, split_by_sentiment)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord", "CrossValReport", "EmbeddingVector", "ExtractionConfig",
    "FeatureMatrix", "OpinionUnit", "ProviderConfig", "RegressionFit", "Review",
    "SyntheticSpec", "Topic", "TopicModel", "TopicModelConfig", "build_features",
    "build_prompt", "build_topic_model", "embed_units", "extract_corpus",
    "filter_overall", "generate_synthetic", "hdbscan", "impact_table",
    "inter_rater_agreement", "kfold_cv", "load_model", "load_reviews", "load_units",
    "load_vectors", "ols_fit", "parse_extraction", "priority_matrix", "reduce_dims",
    "reduce_topics", "sample_for_annotation", "save_model", "save_reviews",
    "save_units", "save_vectors", "sentiment_precision", "split_by_sentiment",
    "t_sf", "topic_precision",
]
