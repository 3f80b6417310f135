"""Per-review topic features, ordinary least squares, and cross-validation.

The model fit is star(r) = b0 + sum_k b_k * s_k(r), where s_k(r) is the
average sentiment of review r's units inside topic k (0 when the topic is
absent) or a 0/1 mention indicator. Coefficients come with standard errors,
t statistics, and two-sided p values; predictive quality is reported as
per-fold and mean R^2 / RMSE under seeded k-fold cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from .corpus import OpinionUnit, Review
from .topics import OUTLIER, TopicModel

MODES = ("with_sentiment", "without_sentiment")


class EmptyCorpus(ValueError):
    """No reviews to build features from."""


class RankZero(ValueError):
    """No usable regression column remains after dropping."""


class ConstantTarget(ValueError):
    """The target is constant, so R^2 is undefined."""


@dataclass
class FeatureMatrix:
    x: np.ndarray                # (n_reviews, n_topics), no intercept column
    y: np.ndarray                # (n_reviews,) star ratings
    topic_ids: list[int]         # column -> topic id
    review_ids: list[str]
    mode: str

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass
class RegressionFit:
    intercept: float
    coefficients: dict[int, float]       # topic id -> beta (dropped topics absent)
    standard_errors: dict[int, float]
    t_statistics: dict[int, float]
    p_values: dict[int, float]
    intercept_se: float
    intercept_t: float
    intercept_p: float
    dropped: list[int]                   # topic ids with no usable column
    n: int
    df: int
    r2: float
    rmse: float

    def predict(self, x: np.ndarray, topic_ids: Sequence[int]) -> np.ndarray:
        beta = np.array([self.coefficients.get(t, 0.0) for t in topic_ids])
        return self.intercept + x @ beta

    def significant_topics(self, alpha: float = 0.05) -> list[int]:
        return [t for t, p in self.p_values.items() if p <= alpha]


@dataclass
class CrossValReport:
    fold_r2: list[float | None]
    fold_rmse: list[float]
    fold_significant: list[int]
    mean_r2: float
    mean_rmse: float
    mean_significant: float
    seed: int
    k: int
    n: int
    constant_target_folds: list[int] = field(default_factory=list)


def build_features(reviews: Sequence[Review], units: Sequence[OpinionUnit],
                   model: TopicModel, mode: str = "with_sentiment") -> FeatureMatrix:
    """One row per review, one column per topic; outlier units contribute nothing.

    with_sentiment cells hold the mean effective sentiment of the review's
    units in that topic (rescaled 1-5 scores under m3), without_sentiment a
    0/1 mention indicator. Reviews with no clustered units keep an all-zero
    row and still inform the intercept.
    """
    if not reviews:
        raise EmptyCorpus("no reviews")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    topic_ids = [t.topic_id for t in model.topics]
    col = {t: j for j, t in enumerate(topic_ids)}
    row = {r.review_id: i for i, r in enumerate(reviews)}
    sums = np.zeros((len(reviews), len(topic_ids)))
    counts = np.zeros((len(reviews), len(topic_ids)))
    for u in units:
        topic = model.assignment.get(u.unit_id, OUTLIER)
        if topic == OUTLIER:
            continue
        if u.review_id not in row:
            raise ValueError(f"unit {u.unit_id!r} references unknown review {u.review_id!r}")
        i, j = row[u.review_id], col[topic]
        sums[i, j] += model.effective_score(u)
        counts[i, j] += 1
    if mode == "with_sentiment":
        x = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    else:
        x = (counts > 0).astype(float)
    y = np.array([float(r.stars) for r in reviews])
    return FeatureMatrix(x=x, y=y, topic_ids=topic_ids,
                         review_ids=[r.review_id for r in reviews], mode=mode)


def t_sf(t: float, df: float) -> float:
    """Upper-tail probability of Student's t via the regularized incomplete beta."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if np.isnan(t):
        return float("nan")
    x = df / (df + t * t)
    half_tail = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return half_tail if t >= 0 else 1.0 - half_tail


def two_sided_p(t: float, df: float) -> float:
    return 2.0 * t_sf(abs(t), df)


def _rank_revealing_columns(x: np.ndarray) -> list[int]:
    """Indices of a maximal independent column set, preferring earlier columns.

    Modified Gram-Schmidt: a column is dropped when its residual against the
    previously kept columns is negligible (or it is identically zero).
    """
    n, p = x.shape
    kept: list[int] = []
    basis: list[np.ndarray] = []
    for j in range(p):
        col = x[:, j].astype(float)
        norm0 = np.linalg.norm(col)
        if norm0 == 0.0:
            continue
        residual = col.copy()
        for q in basis:
            residual -= (q @ residual) * q
        # second orthogonalization pass for numerical safety
        for q in basis:
            residual -= (q @ residual) * q
        norm = np.linalg.norm(residual)
        if norm <= max(n, p) * np.finfo(float).eps * norm0:
            continue
        kept.append(j)
        basis.append(residual / norm)
    return kept


def ols_fit(features: FeatureMatrix) -> RegressionFit:
    """Least squares with intercept; dependent columns dropped and reported.

    Standard errors come from sigma^2 * (X'X)^-1 via the QR factor of the
    retained design; p values are two-sided Student-t tails with
    df = n - retained columns.
    """
    x, y = features.x, features.y
    n = len(y)
    design = np.column_stack([np.ones(n), x])
    kept = _rank_revealing_columns(design)
    if not kept:
        raise RankZero("no usable column remains")
    dropped_topics = [features.topic_ids[j - 1] for j in range(1, design.shape[1])
                      if j not in kept]
    retained = design[:, kept]
    p_retained = len(kept)
    df = n - p_retained
    if df <= 0:
        raise ValueError(f"need n > retained columns: n={n}, retained={p_retained}")
    q, r = np.linalg.qr(retained)
    beta = solve_triangular(r, q.T @ y)
    fitted = retained @ beta
    residuals = y - fitted
    sse = float(residuals @ residuals)
    sigma2 = sse / df
    r_inv = solve_triangular(r, np.eye(p_retained))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = np.array([two_sided_p(float(t), df) for t in tstats])

    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else 0.0)
    rmse = float(np.sqrt(sse / n))

    coefficients, ses, ts, ps = {}, {}, {}, {}
    intercept = intercept_se = intercept_t = intercept_p = 0.0
    for pos, j in enumerate(kept):
        if j == 0:
            intercept = float(beta[pos])
            intercept_se = float(se[pos])
            intercept_t = float(tstats[pos])
            intercept_p = float(pvals[pos])
        else:
            topic = features.topic_ids[j - 1]
            coefficients[topic] = float(beta[pos])
            ses[topic] = float(se[pos])
            ts[topic] = float(tstats[pos])
            ps[topic] = float(pvals[pos])
    return RegressionFit(
        intercept=intercept, coefficients=coefficients, standard_errors=ses,
        t_statistics=ts, p_values=ps, intercept_se=intercept_se,
        intercept_t=intercept_t, intercept_p=intercept_p,
        dropped=dropped_topics, n=n, df=df, r2=r2, rmse=rmse)


def make_folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Disjoint index folds covering range(n), sizes differing by at most one."""
    if n < 2 * k:
        raise ValueError(f"need n >= 2k rows, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    return np.array_split(rng.permutation(n), k)


def kfold_cv(features: FeatureMatrix, k: int = 5, seed: int = 0,
             alpha: float = 0.05) -> CrossValReport:
    """Seeded k-fold cross-validation; R^2 on each fold uses the fold's own mean.

    A fold with a constant hold-out target gets R^2 None and is excluded
    from the mean (flagged in constant_target_folds); RMSE is still reported.
    """
    n = features.n
    folds = make_folds(n, k, seed)
    fold_r2: list[float | None] = []
    fold_rmse: list[float] = []
    fold_sig: list[int] = []
    constant_folds: list[int] = []
    for i, test_idx in enumerate(folds):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        train = FeatureMatrix(
            x=features.x[train_mask], y=features.y[train_mask],
            topic_ids=features.topic_ids,
            review_ids=[rid for rid, keep in zip(features.review_ids, train_mask) if keep],
            mode=features.mode)
        fit = ols_fit(train)
        fold_sig.append(len(fit.significant_topics(alpha)))
        x_test, y_test = features.x[test_idx], features.y[test_idx]
        pred = fit.predict(x_test, features.topic_ids)
        err = y_test - pred
        sse = float(err @ err)
        fold_rmse.append(float(np.sqrt(sse / len(test_idx))))
        sst = float(((y_test - y_test.mean()) ** 2).sum())
        if sst == 0.0:
            fold_r2.append(None)
            constant_folds.append(i)
        else:
            fold_r2.append(1.0 - sse / sst)
    defined = [v for v in fold_r2 if v is not None]
    return CrossValReport(
        fold_r2=fold_r2,
        fold_rmse=fold_rmse,
        fold_significant=fold_sig,
        mean_r2=float(np.mean(defined)) if defined else float("nan"),
        mean_rmse=float(np.mean(fold_rmse)),
        mean_significant=float(np.mean(fold_sig)),
        seed=seed, k=k, n=n,
        constant_target_folds=constant_folds)


def fit_document(fit: RegressionFit, cv: CrossValReport, model_hash: str,
                 mode: str, alpha: float = 0.05) -> dict:
    """The fit artifact: full-precision coefficient and CV tables."""
    coefficients = [{
        "topic_id": t,
        "beta": fit.coefficients[t],
        "se": fit.standard_errors[t],
        "t": fit.t_statistics[t],
        "p": fit.p_values[t],
        "significant": fit.p_values[t] <= alpha,
    } for t in sorted(fit.coefficients)]
    return {
        "model_config_hash": model_hash,
        "mode": mode,
        "n": fit.n,
        "df": fit.df,
        "intercept": {"beta": fit.intercept, "se": fit.intercept_se,
                      "t": fit.intercept_t, "p": fit.intercept_p},
        "coefficients": coefficients,
        "dropped_topics": list(fit.dropped),
        "training_r2": fit.r2,
        "training_rmse": fit.rmse,
        "cross_validation": {
            "k": cv.k,
            "seed": cv.seed,
            "fold_r2": cv.fold_r2,
            "fold_rmse": cv.fold_rmse,
            "fold_significant": cv.fold_significant,
            "mean_r2": cv.mean_r2,
            "mean_rmse": cv.mean_rmse,
            "mean_significant": cv.mean_significant,
            "constant_target_folds": cv.constant_target_folds,
        },
    }
