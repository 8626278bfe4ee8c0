"""ERGM model terms: sufficient statistics and single-toggle change statistics.

A model is an ordered list of terms.  Most terms are dyad-independent: their
contribution to the statistic vector from dyad (i, j) is a constant
coefficient, so compiling a model reduces them to a (q, n, n) coefficient
array.  Three terms are structural and handled explicitly: mutual (directed
reciprocation), gwesp with fixed decay (geometrically weighted edgewise
shared partners), and degree_popularity (sum of degree^(3/2)).

Statistic layout and naming
---------------------------
edges                 -> "edges"
mutual                -> "mutual"
nodefactor(a)         -> "nodefactor.a.<level>" for each level after the
                         omitted one (default: first declared level)
nodecov(a)            -> "nodecov.a"
nodematch(a)          -> "nodematch.a"
nodematch(a, diff)    -> "nodematch.a.<level>" per level
nodemix(a, cells)     -> "nodemix.a.<x>-<y>" per requested cell
gwesp(tau, fixed)     -> "gwesp.fixed.<tau>"
degree_popularity     -> "degree_popularity"
match_interaction(a,b)-> "match.a.b"
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .netgraph import Graph, NodeAttributes, dyad_endpoints

__all__ = [
    "TermSpec",
    "ModelSpec",
    "CompiledModel",
    "ModelError",
    "parse_model",
    "compile_model",
    "compute_stats",
    "change_stats",
    "stat_names",
]

KINDS = (
    "edges",
    "mutual",
    "nodefactor",
    "nodecov",
    "nodematch",
    "nodemix",
    "gwesp",
    "degree_popularity",
    "match_interaction",
)

# Terms whose statistic is a sum of per-dyad constants times the dyad state.
DYAD_INDEPENDENT = (
    "edges",
    "nodefactor",
    "nodecov",
    "nodematch",
    "nodemix",
    "match_interaction",
)


class ModelError(ValueError):
    """Invalid term, argument, or model/attribute mismatch."""


@dataclass(frozen=True)
class TermSpec:
    kind: str
    attr: str | None = None
    attr2: str | None = None
    diff: bool = False
    cells: tuple[tuple[str, str], ...] = ()
    decay: float = 0.0
    omit: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown term kind {self.kind!r}; known: {KINDS}")

    def label(self) -> str:
        """Render back to the model-file syntax."""
        k = self.kind
        if k == "edges" or k == "mutual" or k == "degree_popularity":
            return k
        if k == "nodefactor":
            return f"{k}({self.attr}, {self.omit})" if self.omit else f"{k}({self.attr})"
        if k == "nodecov":
            return f"{k}({self.attr})"
        if k == "nodematch":
            return f"{k}({self.attr}, diff)" if self.diff else f"{k}({self.attr})"
        if k == "nodemix":
            cells = ", ".join(f"{a}-{b}" for a, b in self.cells)
            return f"{k}({self.attr}, {cells})"
        if k == "gwesp":
            return f"gwesp({_fmt_decay(self.decay)}, fixed)"
        return f"{k}({self.attr}, {self.attr2})"


def _fmt_decay(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


@dataclass(frozen=True)
class ModelSpec:
    terms: tuple[TermSpec, ...]

    def __post_init__(self):
        if not self.terms:
            raise ModelError("model needs at least one term")

    def to_text(self) -> str:
        return "\n".join(t.label() for t in self.terms) + "\n"

    @property
    def dyad_independent(self) -> bool:
        return all(t.kind in DYAD_INDEPENDENT for t in self.terms)


_TERM_RE = re.compile(r"^([a-z_]+)\s*(?:\(\s*(.*?)\s*\))?$")


def parse_model(text: str) -> ModelSpec:
    """Parse the model-file syntax: one term per line, '#' comments."""
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _TERM_RE.match(line)
        if not m:
            raise ModelError(f"line {lineno}: cannot parse term {line!r}")
        kind, argtext = m.group(1), m.group(2)
        args = [a.strip() for a in argtext.split(",")] if argtext else []
        try:
            terms.append(_term_from_args(kind, args))
        except ModelError as exc:
            raise ModelError(f"line {lineno}: {exc}") from None
    return ModelSpec(tuple(terms))


def _term_from_args(kind: str, args: list[str]) -> TermSpec:
    if kind in ("edges", "mutual", "degree_popularity"):
        if args:
            raise ModelError(f"{kind} takes no arguments")
        return TermSpec(kind)
    if kind == "nodefactor":
        if len(args) == 1:
            return TermSpec(kind, attr=args[0])
        if len(args) == 2:
            return TermSpec(kind, attr=args[0], omit=args[1])
        raise ModelError("nodefactor needs (attr) or (attr, omitted_level)")
    if kind == "nodecov":
        if len(args) != 1:
            raise ModelError("nodecov needs exactly (attr)")
        return TermSpec(kind, attr=args[0])
    if kind == "nodematch":
        if len(args) == 1:
            return TermSpec(kind, attr=args[0])
        if len(args) == 2 and args[1] == "diff":
            return TermSpec(kind, attr=args[0], diff=True)
        raise ModelError("nodematch needs (attr) or (attr, diff)")
    if kind == "nodemix":
        if len(args) < 2:
            raise ModelError("nodemix needs (attr, cell, ...) with cells like A-B")
        cells = []
        for cell in args[1:]:
            a, sep, b = cell.partition("-")
            if not sep or not a or not b:
                raise ModelError(f"nodemix cell {cell!r} must be 'levelA-levelB'")
            cells.append((a, b))
        return TermSpec(kind, attr=args[0], cells=tuple(cells))
    if kind == "gwesp":
        if len(args) not in (1, 2) or (len(args) == 2 and args[1] != "fixed"):
            raise ModelError("gwesp needs (decay) or (decay, fixed)")
        try:
            decay = float(args[0])
        except ValueError:
            raise ModelError(f"gwesp decay must be a number, got {args[0]!r}") from None
        if decay < 0:
            raise ModelError("gwesp decay must be >= 0")
        return TermSpec(kind, decay=decay)
    if kind == "match_interaction":
        if len(args) != 2:
            raise ModelError("match_interaction needs (attr_a, attr_b)")
        return TermSpec(kind, attr=args[0], attr2=args[1])
    raise ModelError(f"unknown term kind {kind!r}")


# -- compilation -----------------------------------------------------------


@dataclass
class CompiledModel:
    """A model bound to (n, directed, attributes), ready for evaluation."""

    n: int
    directed: bool
    names: tuple[str, ...]
    dyadcov: np.ndarray          # (q, n, n) per-dyad coefficients, zero rows for structural terms
    mutual_idx: int = -1
    gwesp_idx: int = -1
    gwesp_decay: float = 0.0
    degpop_idx: int = -1
    spec: ModelSpec = field(default=None, repr=False)
    attrs: NodeAttributes = field(default=None, repr=False)

    @property
    def q(self) -> int:
        return len(self.names)

    @property
    def dyad_independent(self) -> bool:
        return self.mutual_idx < 0 and self.gwesp_idx < 0 and self.degpop_idx < 0

    def dyadcov_flat(self) -> np.ndarray:
        di, dj = dyad_endpoints(self.n, self.directed)
        return self.dyadcov[:, di, dj]


def _cat(attrs: NodeAttributes, name: str):
    try:
        return attrs.cat(name)
    except KeyError as exc:
        raise ModelError(str(exc.args[0])) from None


def _num(attrs: NodeAttributes, name: str):
    try:
        return attrs.num(name)
    except KeyError as exc:
        raise ModelError(str(exc.args[0])) from None


def _level(col, level: str) -> int:
    try:
        return col.level_code(level)
    except KeyError as exc:
        raise ModelError(str(exc.args[0])) from None


def compile_model(
    model: ModelSpec, n: int, directed: bool, attrs: NodeAttributes | None = None
) -> CompiledModel:
    if attrs is None:
        attrs = NodeAttributes.empty(n)
    elif attrs.n != n:
        raise ModelError(f"attribute table has {attrs.n} rows, graph has {n} nodes")

    names: list[str] = []
    covs: list[np.ndarray] = []
    mutual_idx = gwesp_idx = degpop_idx = -1
    gwesp_decay = 0.0

    for term in model.terms:
        k = term.kind
        if k == "edges":
            names.append("edges")
            covs.append(np.ones((n, n)))
        elif k == "mutual":
            if not directed:
                raise ModelError("mutual requires a directed graph")
            if mutual_idx >= 0:
                raise ModelError("mutual may appear only once")
            mutual_idx = len(names)
            names.append("mutual")
            covs.append(np.zeros((n, n)))
        elif k == "nodefactor":
            col = _cat(attrs, term.attr)
            omit = term.omit if term.omit is not None else col.levels[0]
            omit_code = _level(col, omit)
            for code, level in enumerate(col.levels):
                if code == omit_code:
                    continue
                ind = (col.codes == code).astype(np.float64)
                names.append(f"nodefactor.{term.attr}.{level}")
                covs.append(ind[:, None] + ind[None, :])
        elif k == "nodecov":
            z = _num(attrs, term.attr).values
            names.append(f"nodecov.{term.attr}")
            covs.append(z[:, None] + z[None, :])
        elif k == "nodematch":
            col = _cat(attrs, term.attr)
            same = (col.codes[:, None] == col.codes[None, :]).astype(np.float64)
            if term.diff:
                for code, level in enumerate(col.levels):
                    ind = (col.codes == code).astype(np.float64)
                    names.append(f"nodematch.{term.attr}.{level}")
                    covs.append(same * np.outer(ind, ind))
            else:
                names.append(f"nodematch.{term.attr}")
                covs.append(same)
        elif k == "nodemix":
            col = _cat(attrs, term.attr)
            for a, b in term.cells:
                ca, cb = _level(col, a), _level(col, b)
                ia = (col.codes == ca).astype(np.float64)
                ib = (col.codes == cb).astype(np.float64)
                cell = np.outer(ia, ib)
                if not directed:
                    cell = np.maximum(cell, cell.T)
                names.append(f"nodemix.{term.attr}.{a}-{b}")
                covs.append(cell)
        elif k == "gwesp":
            if directed:
                raise ModelError("gwesp is defined here for undirected graphs only")
            if gwesp_idx >= 0:
                raise ModelError("gwesp may appear only once")
            gwesp_idx = len(names)
            gwesp_decay = term.decay
            names.append(f"gwesp.fixed.{_fmt_decay(term.decay)}")
            covs.append(np.zeros((n, n)))
        elif k == "degree_popularity":
            if degpop_idx >= 0:
                raise ModelError("degree_popularity may appear only once")
            degpop_idx = len(names)
            names.append("degree_popularity")
            covs.append(np.zeros((n, n)))
        elif k == "match_interaction":
            ca = _cat(attrs, term.attr)
            cb = _cat(attrs, term.attr2)
            both = (ca.codes[:, None] == ca.codes[None, :]) & (
                cb.codes[:, None] == cb.codes[None, :]
            )
            names.append(f"match.{term.attr}.{term.attr2}")
            covs.append(both.astype(np.float64))
        else:  # pragma: no cover - guarded by TermSpec validation
            raise ModelError(f"unhandled term kind {k!r}")

    if len(set(names)) != len(names):
        dupes = sorted({x for x in names if names.count(x) > 1})
        raise ModelError(f"duplicate statistics (collinear terms): {dupes}")
    dyadcov = np.ascontiguousarray(np.stack(covs, axis=0), dtype=np.float64)
    idx = np.arange(n)
    dyadcov[:, idx, idx] = 0.0
    return CompiledModel(
        n=n,
        directed=directed,
        names=tuple(names),
        dyadcov=dyadcov,
        mutual_idx=mutual_idx,
        gwesp_idx=gwesp_idx,
        gwesp_decay=gwesp_decay,
        degpop_idx=degpop_idx,
        spec=model,
        attrs=attrs,
    )


def stat_names(
    model: ModelSpec, n: int, directed: bool, attrs: NodeAttributes | None = None
) -> tuple[str, ...]:
    return compile_model(model, n, directed, attrs).names


def _as_compiled(model, graph: Graph, attrs) -> CompiledModel:
    if isinstance(model, CompiledModel):
        if model.n != graph.n or model.directed != graph.directed:
            raise ModelError("compiled model does not match graph shape")
        return model
    return compile_model(model, graph.n, graph.directed, attrs)


def gwesp_weight(k, decay: float):
    """Contribution of one edge with k shared partners, fixed decay."""
    return np.exp(decay) * (1.0 - (1.0 - np.exp(-decay)) ** np.asarray(k, dtype=np.float64))


def compute_stats(model, graph: Graph, attrs: NodeAttributes | None = None) -> np.ndarray:
    """Evaluate the full statistic vector g(x)."""
    cm = _as_compiled(model, graph, attrs)
    adj = graph.to_dense().astype(np.float64)
    out = np.empty(cm.q)

    scale = 1.0 if cm.directed else 0.5
    sums = np.tensordot(cm.dyadcov, adj, axes=([1, 2], [0, 1]))
    out[:] = scale * sums

    if cm.mutual_idx >= 0:
        out[cm.mutual_idx] = 0.5 * np.sum(adj * adj.T)
    if cm.gwesp_idx >= 0:
        shared = adj @ adj
        iu = np.triu_indices(cm.n, k=1)
        on = adj[iu] > 0
        out[cm.gwesp_idx] = float(np.sum(gwesp_weight(shared[iu][on], cm.gwesp_decay)))
    if cm.degpop_idx >= 0:
        deg = adj.sum(axis=0) if cm.directed else adj.sum(axis=1)
        out[cm.degpop_idx] = float(np.sum(deg**1.5))
    return out


def change_stats(model, graph: Graph, i: int, j: int, attrs: NodeAttributes | None = None) -> np.ndarray:
    """g(x with dyad (i,j) toggled) - g(x), in O(degree) per structural term.

    Mirrors the sampler kernel's update rule; tests pin both against the
    full-recomputation difference.
    """
    cm = _as_compiled(model, graph, attrs)
    if i == j or not (0 <= i < cm.n and 0 <= j < cm.n):
        raise ValueError(f"invalid dyad ({i}, {j})")
    adj = graph.to_dense()
    sign = -1.0 if adj[i, j] else 1.0
    dg = sign * cm.dyadcov[:, i, j]

    if cm.mutual_idx >= 0:
        dg[cm.mutual_idx] += sign * adj[j, i]
    if cm.degpop_idx >= 0:
        deg = adj.sum(axis=0, dtype=np.int64) if cm.directed else adj.sum(axis=1, dtype=np.int64)
        step = 1 if sign > 0 else -1
        if cm.directed:
            dg[cm.degpop_idx] += float(deg[j] + step) ** 1.5 - float(deg[j]) ** 1.5
        else:
            dg[cm.degpop_idx] += (
                float(deg[i] + step) ** 1.5
                - float(deg[i]) ** 1.5
                + float(deg[j] + step) ** 1.5
                - float(deg[j]) ** 1.5
            )
    if cm.gwesp_idx >= 0:
        dg[cm.gwesp_idx] += sign * _gwesp_toggle_magnitude(adj, i, j, sign, cm.gwesp_decay)
    return dg


def _gwesp_toggle_magnitude(adj, i, j, sign, decay) -> float:
    """|change| in the gwesp statistic from toggling (i, j).

    For an addition the new edge contributes w(sp_ij) and every edge (i,h),
    (j,h) through a common neighbor h gains one shared partner, adding
    (1 - e^-decay)^sp per such edge.  For a removal the same bookkeeping runs
    on the shared-partner counts of the graph without the edge, which shifts
    each count down by one.
    """
    n = adj.shape[0]
    eptau = np.exp(decay)
    c = 1.0 - np.exp(-decay)
    common = np.flatnonzero((adj[i] == 1) & (adj[j] == 1))
    total = eptau * (1.0 - c ** len(common))
    for h in common:
        sp_ih = int(np.count_nonzero(adj[i] & adj[h]))
        sp_jh = int(np.count_nonzero(adj[j] & adj[h]))
        if sign > 0:
            total += c**sp_ih + c**sp_jh
        else:
            total += c ** (sp_ih - 1) + c ** (sp_jh - 1)
    return total
