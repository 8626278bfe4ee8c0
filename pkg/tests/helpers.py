"""Bridges between the package's graph objects and the oracle's dense matrices."""
from __future__ import annotations

import numpy as np

from rrergm import Graph

import reference as ref


def to_dense(g: Graph) -> np.ndarray:
    return np.asarray(g.to_dense(), dtype=np.int64)


def from_dense(a: np.ndarray, directed: bool) -> Graph:
    return Graph.from_dense(np.asarray(a), directed)


def oracle_index(a: np.ndarray, n: int, directed: bool) -> int:
    """Position of a dense graph in reference.all_graphs(n, directed)."""
    pairs = ref.pair_list(n, directed)
    idx = 0
    for i, j in pairs:
        idx = (idx << 1) | int(a[i, j])
    return idx


def histogram_draws(graphs, n: int, directed: bool) -> np.ndarray:
    counts = np.zeros(2 ** len(ref.pair_list(n, directed)), dtype=np.int64)
    for g in graphs:
        counts[oracle_index(to_dense(g), n, directed)] += 1
    return counts
