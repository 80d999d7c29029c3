"""Strongly connected components and the recurrent part of a directed graph."""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


def strongly_connected_components(n: int, edges) -> np.ndarray:
    """Component label of each of the ``n`` nodes."""
    edges = list(edges)
    if n == 0:
        return np.zeros(0, dtype=int)
    # building the CSR arrays directly skips scipy's slower COO conversion;
    # csgraph needs canonical input (sorted, no duplicate entries)
    edges = sorted(set(edges))
    src = np.fromiter((u for u, _ in edges), dtype=np.int64, count=len(edges))
    dst = np.fromiter((v for _, v in edges), dtype=np.int64, count=len(edges))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    adj = csr_matrix((np.ones(len(edges)), dst, indptr), shape=(n, n))
    _, labels = connected_components(adj, directed=True, connection="strong")
    return labels


def recurrent_classes(n: int, edges) -> list[list[int]]:
    """Closed communicating classes: components with no edge leaving them.

    A component consisting of a single node without a self-loop has no
    recurrent behaviour and is not returned even when it has no out-edges.
    """
    edges = list(edges)
    labels = strongly_connected_components(n, edges)
    leaves = set()
    has_cycle = set()
    for u, v in edges:
        if labels[u] != labels[v]:
            leaves.add(labels[u])
        else:
            has_cycle.add(labels[u])
    classes: dict[int, list[int]] = {}
    for node in range(n):
        lab = labels[node]
        if lab not in leaves and lab in has_cycle:
            classes.setdefault(lab, []).append(node)
    return sorted(classes.values())


def is_strongly_connected(n: int, edges) -> bool:
    if n == 0:
        return False
    return len(set(strongly_connected_components(n, edges).tolist())) == 1
