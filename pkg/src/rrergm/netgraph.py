"""Graphs addressed by dyad, node attribute tables, and their plain-text formats.

A graph over n nodes is a vector of dyad states in a fixed canonical order:
row-major over ordered pairs (i, j), i != j, for directed graphs, and over
unordered pairs i < j for undirected ones.  Everything downstream (release
mechanisms, samplers, statistic evaluation) indexes dyads through this one
enumeration, so it is defined here once.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "DyadIndex",
    "Graph",
    "NodeAttributes",
    "GraphFormatError",
    "dyad_count",
    "dyad_endpoints",
    "dyad_index",
    "hamming_distance",
    "load_edge_list",
    "write_edge_list",
    "load_attributes",
]


class GraphFormatError(ValueError):
    """Malformed edge-list, attribute, or size input."""


def dyad_count(n: int, directed: bool) -> int:
    return n * (n - 1) if directed else n * (n - 1) // 2


@lru_cache(maxsize=64)
def dyad_endpoints(n: int, directed: bool):
    """Endpoint arrays (heads, tails) for the canonical dyad enumeration.

    Index d runs over ordered pairs (directed) or pairs i < j (undirected);
    the arrays are cached and marked read-only because every module shares them.
    """
    if directed:
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        mask = i != j
        di = i[mask].astype(np.int64)
        dj = j[mask].astype(np.int64)
    else:
        iu = np.triu_indices(n, k=1)
        di = iu[0].astype(np.int64)
        dj = iu[1].astype(np.int64)
    di.setflags(write=False)
    dj.setflags(write=False)
    return di, dj


def dyad_index(n: int, directed: bool, i: int, j: int) -> int:
    """Position of dyad (i, j) in the canonical enumeration (0-based nodes)."""
    if i == j:
        raise ValueError("self-loops are not dyads")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"node out of range for n={n}: ({i}, {j})")
    if directed:
        return i * (n - 1) + (j if j < i else j - 1)
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@dataclass(frozen=True)
class DyadIndex:
    """An (i, j) node pair; order is ignored for undirected graphs."""

    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("self-loops are not dyads")

    def canonical(self, directed: bool) -> "DyadIndex":
        if not directed and self.i > self.j:
            return DyadIndex(self.j, self.i)
        return self


class Graph:
    """Fixed-size simple graph with O(1) dyad get/set.

    Instances are treated as immutable once shared: mutating operations
    return a new Graph. The state vector is exposed read-only.
    """

    __slots__ = ("n", "directed", "_states")

    def __init__(self, n: int, directed: bool = False, states: np.ndarray | None = None):
        if n < 1:
            raise ValueError("graph needs at least one node")
        self.n = int(n)
        self.directed = bool(directed)
        nd = dyad_count(n, directed)
        if states is None:
            states = np.zeros(nd, dtype=bool)
        else:
            states = np.asarray(states, dtype=bool)
            if states.shape != (nd,):
                raise ValueError(f"state vector must have length {nd}, got {states.shape}")
            states = states.copy()
        states.setflags(write=False)
        self._states = states

    # -- constructors ---------------------------------------------------

    @classmethod
    def empty(cls, n: int, directed: bool = False) -> "Graph":
        return cls(n, directed)

    @classmethod
    def from_edges(cls, n: int, edges, directed: bool = False) -> "Graph":
        nd = dyad_count(n, directed)
        states = np.zeros(nd, dtype=bool)
        for i, j in edges:
            states[dyad_index(n, directed, i, j)] = True
        return cls(n, directed, states)

    @classmethod
    def from_dense(cls, adj, directed: bool = False) -> "Graph":
        adj = np.asarray(adj)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValueError("adjacency must be square")
        if not directed and not np.array_equal(adj, adj.T):
            raise ValueError("undirected adjacency must be symmetric")
        if np.any(np.diagonal(adj)):
            raise ValueError("self-loops are not allowed")
        di, dj = dyad_endpoints(n, directed)
        return cls(n, directed, adj[di, dj] != 0)

    # -- dyad access ----------------------------------------------------

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self._states))

    def get(self, i: int, j: int) -> bool:
        return bool(self._states[dyad_index(self.n, self.directed, i, j)])

    def with_dyad(self, i: int, j: int, value: bool) -> "Graph":
        states = self._states.copy()
        states[dyad_index(self.n, self.directed, i, j)] = value
        return Graph(self.n, self.directed, states)

    def toggle_dyad(self, i: int, j: int) -> "Graph":
        d = dyad_index(self.n, self.directed, i, j)
        states = self._states.copy()
        states[d] = not states[d]
        return Graph(self.n, self.directed, states)

    # -- whole-graph views ----------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Adjacency as an (n, n) uint8 matrix (symmetric when undirected)."""
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        di, dj = dyad_endpoints(self.n, self.directed)
        adj[di, dj] = self._states
        if not self.directed:
            adj[dj, di] = self._states
        return adj

    def edges(self):
        di, dj = dyad_endpoints(self.n, self.directed)
        on = self._states
        return list(zip(di[on].tolist(), dj[on].tolist()))

    def degrees(self) -> np.ndarray:
        """Total degree (undirected) or in-degree (directed) per node."""
        adj = self.to_dense()
        if self.directed:
            return adj.sum(axis=0).astype(np.int64)
        return adj.sum(axis=1).astype(np.int64)

    def density(self) -> float:
        return self.edge_count / dyad_count(self.n, self.directed)

    # -- comparisons ----------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and self.directed == other.directed
            and np.array_equal(self._states, other._states)
        )

    def __hash__(self):
        return hash((self.n, self.directed, self._states.tobytes()))

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, {kind}, edges={self.edge_count})"


def hamming_distance(a: Graph, b: Graph) -> int:
    """Number of dyads on which two graphs over the same node set differ."""
    if a.n != b.n or a.directed != b.directed:
        raise ValueError("graphs must share node count and directedness")
    return int(np.count_nonzero(a.states ^ b.states))


# -- node attributes -----------------------------------------------------


@dataclass(frozen=True)
class CatColumn:
    """Categorical column: levels in declaration order plus integer codes."""

    levels: tuple[str, ...]
    codes: np.ndarray

    def level_code(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise KeyError(f"unknown level {level!r}; have {self.levels}") from None


@dataclass(frozen=True)
class NumColumn:
    values: np.ndarray


class NodeAttributes:
    """Per-node covariate columns, categorical or numeric."""

    def __init__(self, n: int, columns: dict | None = None):
        self.n = int(n)
        self._cols: dict[str, CatColumn | NumColumn] = dict(columns or {})
        for name, col in self._cols.items():
            size = len(col.codes) if isinstance(col, CatColumn) else len(col.values)
            if size != self.n:
                raise ValueError(f"column {name!r} has {size} rows, expected {self.n}")

    @classmethod
    def empty(cls, n: int) -> "NodeAttributes":
        return cls(n)

    @classmethod
    def from_dict(cls, data: dict) -> "NodeAttributes":
        """Build from python lists; strings become categorical, numbers numeric."""
        cols = {}
        n = None
        for name, values in data.items():
            values = list(values)
            if n is None:
                n = len(values)
            if all(isinstance(v, str) for v in values):
                cols[name] = _cat_from_tokens(values)
            else:
                cols[name] = NumColumn(np.asarray(values, dtype=np.float64))
        return cls(n if n is not None else 0, cols)

    @property
    def names(self):
        return tuple(self._cols)

    def __contains__(self, name):
        return name in self._cols

    def column(self, name: str):
        if name not in self._cols:
            raise KeyError(f"no attribute column {name!r}; have {self.names}")
        return self._cols[name]

    def cat(self, name: str) -> CatColumn:
        col = self.column(name)
        if not isinstance(col, CatColumn):
            raise TypeError(f"attribute {name!r} is numeric, expected categorical")
        return col

    def num(self, name: str) -> NumColumn:
        col = self.column(name)
        if not isinstance(col, NumColumn):
            raise TypeError(f"attribute {name!r} is categorical, expected numeric")
        return col


def _cat_from_tokens(tokens) -> CatColumn:
    levels: list[str] = []
    codes = np.empty(len(tokens), dtype=np.int64)
    for row, tok in enumerate(tokens):
        if tok not in levels:
            levels.append(tok)
        codes[row] = levels.index(tok)
    codes.setflags(write=False)
    return CatColumn(tuple(levels), codes)


# -- file formats ----------------------------------------------------------
#
# Edge list: one "i j" pair per line, 1-based node ids, '#' starts a comment,
# blank lines ignored.  Attribute table: CSV whose header cells are
# "name:type" with type in {cat, num} and exactly one row per node.


def load_edge_list(path, n: int, directed: bool = False) -> Graph:
    nd = dyad_count(n, directed)
    states = np.zeros(nd, dtype=bool)
    with open(path, "r", encoding="utf-8", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 'i j', got {raw.strip()!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {raw.strip()!r}") from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise GraphFormatError(f"{path}:{lineno}: node id out of range 1..{n}: ({i}, {j})")
            if i == j:
                raise GraphFormatError(f"{path}:{lineno}: self-loop on node {i}")
            states[dyad_index(n, directed, i - 1, j - 1)] = True
    return Graph(n, directed, states)


def write_edge_list(graph: Graph, path) -> None:
    """Write edges 1-based in canonical dyad order; loads back identically."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, j in graph.edges():
            fh.write(f"{i + 1} {j + 1}\n")


def load_attributes(path, n: int) -> NodeAttributes:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphFormatError(f"{path}: empty attribute file") from None
        specs = []
        for cell in header:
            name, sep, kind = cell.strip().partition(":")
            if not sep or kind not in ("cat", "num") or not name:
                raise GraphFormatError(
                    f"{path}: header cell {cell!r} must be 'name:cat' or 'name:num'"
                )
            specs.append((name, kind))
        if len({s[0] for s in specs}) != len(specs):
            raise GraphFormatError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(specs):
                raise GraphFormatError(
                    f"{path}:{lineno}: expected {len(specs)} cells, got {len(row)}"
                )
            rows.append([c.strip() for c in row])
    if len(rows) != n:
        raise GraphFormatError(f"{path}: expected {n} node rows, found {len(rows)}")
    cols: dict[str, CatColumn | NumColumn] = {}
    for k, (name, kind) in enumerate(specs):
        tokens = [row[k] for row in rows]
        for offset, tok in enumerate(tokens):
            if tok == "":
                raise GraphFormatError(f"{path}: missing value for {name!r} at node {offset + 1}")
        if kind == "cat":
            cols[name] = _cat_from_tokens(tokens)
        else:
            try:
                values = np.array([float(t) for t in tokens], dtype=np.float64)
            except ValueError:
                raise GraphFormatError(f"{path}: non-numeric value in column {name!r}") from None
            cols[name] = NumColumn(values)
    return NodeAttributes(n, cols)
