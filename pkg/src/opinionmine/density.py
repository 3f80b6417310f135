"""Hierarchical density clustering with hard assignments and an outlier label.

Pipeline: core distances (distance to the min_samples-th nearest neighbor,
counting the point itself), mutual-reachability distances, a minimum
spanning tree built by Prim's algorithm with O(n) memory, the single-linkage
dendrogram, a condensed tree at min_cluster_size, and excess-of-mass cluster
extraction. Points in no selected cluster are labeled -1; selecting the root
(everything in one cluster) is not allowed.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

# Zero-distance merges (duplicate points) would give infinite density;
# capping keeps stability sums finite without affecting ordinary data.
_MAX_LAMBDA = 1e12


def core_distances(points: np.ndarray, min_samples: int) -> np.ndarray:
    n = len(points)
    k = min(min_samples, n)
    if k <= 1:
        return np.zeros(n)
    dists, _ = cKDTree(points).query(points, k=k)
    return np.ascontiguousarray(dists[:, -1])


def _mst_edges(points: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Prim MST over the mutual-reachability graph; rows (a, b, weight)."""
    n = len(points)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    source = np.full(n, -1, dtype=np.int64)
    edges = np.empty((n - 1, 3))
    current = 0
    for i in range(n - 1):
        in_tree[current] = True
        best[current] = np.inf
        delta = points - points[current]
        dist = np.sqrt(np.einsum("ij,ij->i", delta, delta))
        reach = np.maximum(np.maximum(dist, core), core[current])
        closer = (~in_tree) & (reach < best)
        best[closer] = reach[closer]
        source[closer] = current
        nxt = int(np.argmin(best))
        edges[i] = (source[nxt], nxt, best[nxt])
        current = nxt
    order = np.argsort(edges[:, 2], kind="stable")
    return edges[order]


def _single_linkage(edges: np.ndarray, n: int) -> np.ndarray:
    """Union-find over sorted MST edges; rows (left, right, distance, size).

    Merge i creates dendrogram node n + i; leaves are 0..n-1.
    """
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    merges = np.empty((n - 1, 4))
    for i, (a, b, w) in enumerate(edges):
        ra, rb = find(int(a)), find(int(b))
        node = n + i
        merges[i] = (ra, rb, w, size[ra] + size[rb])
        parent[ra] = parent[rb] = node
        size[node] = size[ra] + size[rb]
    return merges


def _subtree_leaves(start: int, merges: np.ndarray, n: int) -> tuple[list[int], list[int]]:
    """All nodes under `start` (inclusive), split into (leaves, internal)."""
    leaves, internal = [], []
    stack = [start]
    while stack:
        node = stack.pop()
        if node < n:
            leaves.append(node)
        else:
            internal.append(node)
            row = merges[node - n]
            stack.append(int(row[0]))
            stack.append(int(row[1]))
    return leaves, internal


def _condense_tree(merges: np.ndarray, n: int,
                   min_cluster_size: int) -> list[tuple[int, int, float, int]]:
    """Rows (parent_cluster, child, lambda, size); child < n means a point.

    Cluster ids start at n (the root). A child subtree smaller than
    min_cluster_size falls out of its parent as individual points at the
    split's lambda; a split into two large-enough sides creates two new
    clusters.
    """
    root = 2 * n - 2
    rows: list[tuple[int, int, float, int]] = []
    relabel = {root: n}
    next_label = n + 1
    ignore = np.zeros(2 * n - 1, dtype=bool)
    # BFS so every node's cluster relabel is set before the node is processed
    queue = [root]
    head = 0
    while head < len(queue):
        node = queue[head]
        head += 1
        if node < n or ignore[node]:
            continue
        left, right, dist, _ = merges[node - n]
        left, right = int(left), int(right)
        lam = min(1.0 / dist, _MAX_LAMBDA) if dist > 0 else _MAX_LAMBDA
        left_size = int(merges[left - n][3]) if left >= n else 1
        right_size = int(merges[right - n][3]) if right >= n else 1
        cluster = relabel[node]
        big_left = left_size >= min_cluster_size
        big_right = right_size >= min_cluster_size
        if big_left and big_right:
            relabel[left] = next_label
            rows.append((cluster, next_label, lam, left_size))
            next_label += 1
            relabel[right] = next_label
            rows.append((cluster, next_label, lam, right_size))
            next_label += 1
            queue.extend((left, right))
        elif not big_left and not big_right:
            for child in (left, right):
                leaves, internal = _subtree_leaves(child, merges, n)
                for p in leaves:
                    rows.append((cluster, p, lam, 1))
                ignore[internal] = True
        else:
            small, large = (left, right) if not big_left else (right, left)
            relabel[large] = cluster
            queue.append(large)
            leaves, internal = _subtree_leaves(small, merges, n)
            for p in leaves:
                rows.append((cluster, p, lam, 1))
            ignore[internal] = True
    return rows


def _extract_labels(rows: list[tuple[int, int, float, int]], n: int) -> np.ndarray:
    root = n
    birth: dict[int, float] = {root: 0.0}
    children_of: dict[int, list[int]] = {}
    for parent, child, lam, _ in rows:
        if child >= n:
            birth[child] = lam
            children_of.setdefault(parent, []).append(child)

    stability: dict[int, float] = {c: 0.0 for c in birth}
    for parent, _, lam, size in rows:
        stability[parent] += (lam - birth[parent]) * size

    # Excess of mass, bottom-up (child cluster ids always exceed the parent's)
    selected: dict[int, bool] = {}
    subtree_value: dict[int, float] = {}
    for cluster in sorted(birth, reverse=True):
        if cluster == root:
            continue
        kid_sum = sum(subtree_value[k] for k in children_of.get(cluster, []))
        if children_of.get(cluster) and stability[cluster] < kid_sum:
            selected[cluster] = False
            subtree_value[cluster] = kid_sum
        else:
            selected[cluster] = True
            subtree_value[cluster] = stability[cluster]

    # The shallowest selected cluster on each root-to-leaf path wins
    winners: list[int] = []
    stack = list(children_of.get(root, []))
    while stack:
        cluster = stack.pop()
        if selected[cluster]:
            winners.append(cluster)
        else:
            stack.extend(children_of.get(cluster, []))
    winners.sort()
    winner_label = {c: i for i, c in enumerate(winners)}

    parent_of = {child: parent for parent, child, _, _ in rows if child >= n}
    nearest: dict[int, int] = {}

    def nearest_winner(cluster: int) -> int:
        seen = []
        node = cluster
        while node != root and node not in nearest:
            if node in winner_label:
                nearest[node] = winner_label[node]
                break
            seen.append(node)
            node = parent_of[node]
        result = nearest.get(node, -1)
        for s in seen:
            nearest[s] = result
        return result

    labels = np.full(n, -1, dtype=np.int64)
    for parent, child, _, _ in rows:
        if child < n:
            labels[child] = nearest_winner(parent)
    return labels


def hdbscan(points: np.ndarray, min_cluster_size: int,
            min_samples: int | None = None) -> np.ndarray:
    """Hard cluster labels for each point; -1 marks outliers.

    min_samples defaults to min_cluster_size. An all-outlier result is legal
    (for example when n < min_cluster_size).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {points.shape}")
    n = len(points)
    if n == 0:
        raise ValueError("need at least one point")
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if min_samples is None:
        min_samples = min_cluster_size
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if n == 1 or n < min_cluster_size:
        return np.full(n, -1, dtype=np.int64)
    core = core_distances(points, min_samples)
    edges = _mst_edges(points, core)
    merges = _single_linkage(edges, n)
    rows = _condense_tree(merges, n, min_cluster_size)
    return _extract_labels(rows, n)
