"""Dimensionality reduction for unit vectors: mean-centered PCA via SVD.

Deterministic by construction (no stochastic neighbor embedding): runs with
the same inputs produce bitwise-identical projections. The sign of each
component is fixed so that its largest-magnitude loading is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DEGENERATE_TOL = 1e-12


@dataclass
class Reduction:
    values: np.ndarray          # (n, k) projected coordinates
    components: np.ndarray      # (k, dim) principal directions
    mean: np.ndarray            # (dim,) column means
    singular_values: np.ndarray
    degenerate: bool = False    # all inputs identical; values are all-zero


def reduce_dims(vectors: np.ndarray, reduced_dim: int, seed: int = 0) -> Reduction:
    """Project vectors onto their top principal directions.

    `seed` is accepted for interface parity with stochastic reducers and is
    unused here. The output dimension is min(reduced_dim, n, dim).
    """
    del seed
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {x.shape}")
    n, dim = x.shape
    if reduced_dim < 1:
        raise ValueError("reduced_dim must be >= 1")
    if n < reduced_dim:
        raise ValueError(f"need at least reduced_dim={reduced_dim} vectors, got {n}")
    k = min(reduced_dim, n, dim)
    mean = x.mean(axis=0)
    centered = x - mean
    if float(np.abs(centered).max(initial=0.0)) <= _DEGENERATE_TOL:
        return Reduction(values=np.zeros((n, k)), components=np.zeros((k, dim)),
                         mean=mean, singular_values=np.zeros(k), degenerate=True)
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    u, s, vt = u[:, :k], s[:k], vt[:k]
    for i in range(k):
        j = int(np.argmax(np.abs(vt[i])))
        if vt[i, j] < 0:
            vt[i] = -vt[i]
            u[:, i] = -u[:, i]
    return Reduction(values=u * s, components=vt, mean=mean, singular_values=s)
