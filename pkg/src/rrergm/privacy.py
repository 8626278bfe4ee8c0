"""Dyadwise randomized response and its edge-privacy accounting.

The mechanism keeps a true edge with probability p and reports a false edge
with probability 1 - q, independently per dyad.  Per-dyad privacy loss is

    eps_ij = log max{ q/(1-p), (1-p)/q, (1-q)/p, p/(1-q) }

and the guarantee for the whole release is the worst dyad.  Boundary values
(p or q in {0, 1}) give eps = infinity and are rejected unless the mechanism
was built in explicit non-private mode.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .netgraph import Graph, NodeAttributes, dyad_count, dyad_endpoints

__all__ = [
    "MechanismError",
    "MechanismParams",
    "RiskReport",
    "EdpCheck",
    "epsilon_of",
    "optimal_pq",
    "feasible_bounds",
    "build_mechanism",
    "release",
    "log_mechanism_prob",
    "conditional_llr",
    "verify_edp",
    "parse_mechanism",
]


class MechanismError(ValueError):
    """Invalid mechanism parameters or config text."""


def epsilon_of(p: float, q: float) -> float:
    """Privacy loss of a single dyad's randomized response with keep/kill (p, q)."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise MechanismError(f"probabilities must lie in [0, 1], got p={p}, q={q}")
    if p in (0.0, 1.0) or q in (0.0, 1.0):
        return math.inf
    ratios = (q / (1.0 - p), (1.0 - p) / q, (1.0 - q) / p, p / (1.0 - q))
    return math.log(max(ratios))


def optimal_pq(eps: float) -> tuple[float, float]:
    """The variance-minimizing corner of the feasible region: p = q = e^eps/(1+e^eps)."""
    if eps <= 0:
        raise MechanismError("eps must be positive")
    p = math.exp(eps) / (1.0 + math.exp(eps))
    return p, p


def eps_for_flip(pi: float) -> float:
    """Privacy level of the symmetric mechanism with flip probability pi = 1 - p."""
    if not 0.0 < pi < 0.5:
        raise MechanismError("flip probability must lie in (0, 0.5)")
    return math.log((1.0 - pi) / pi)


def feasible_bounds(p: float, eps: float) -> tuple[float, float]:
    """Range of q for which (p, q) satisfies the eps constraint, at fixed p.

    The feasible set is a rhombus with corners at (0,1), (1,0) and the two
    symmetric points; both bounds are piecewise linear in p.
    """
    if not 0.0 < p < 1.0:
        raise MechanismError("p must lie strictly in (0, 1)")
    if eps <= 0:
        raise MechanismError("eps must be positive")
    ee = math.exp(eps)
    lo = 1.0 - ee * p if p < 1.0 / (1.0 + ee) else (1.0 - p) / ee
    hi = 1.0 - p / ee if p < ee / (1.0 + ee) else ee * (1.0 - p)
    return lo, hi


class MechanismParams:
    """Per-dyad randomized-response probabilities over one graph shape.

    Holds flat arrays p, q in canonical dyad order, plus the node-group
    structure when built from a group table (kept for risk reporting).
    """

    def __init__(
        self,
        n: int,
        directed: bool,
        p: np.ndarray,
        q: np.ndarray,
        *,
        group_labels: np.ndarray | None = None,
        eps_table: np.ndarray | None = None,
        allow_nondp: bool = False,
    ):
        nd = dyad_count(n, directed)
        p = np.asarray(p, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        if p.shape != (nd,) or q.shape != (nd,):
            raise MechanismError(f"p and q must be flat arrays of length {nd}")
        if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)):
            raise MechanismError("probabilities must lie in [0, 1]")
        boundary = np.any((p <= 0) | (p >= 1) | (q <= 0) | (q >= 1))
        if boundary and not allow_nondp:
            raise MechanismError(
                "p or q on {0, 1} gives eps = infinity; pass allow_nondp=True "
                "to build a non-private mechanism deliberately"
            )
        self.n = int(n)
        self.directed = bool(directed)
        self.p = p
        self.q = q
        self.group_labels = None if group_labels is None else np.asarray(group_labels, dtype=np.int64)
        self.eps_table = None if eps_table is None else np.asarray(eps_table, dtype=np.float64)
        self.allow_nondp = bool(allow_nondp)

    # -- constructors ---------------------------------------------------

    @classmethod
    def uniform(cls, n: int, eps: float, directed: bool = False) -> "MechanismParams":
        p, q = optimal_pq(eps)
        nd = dyad_count(n, directed)
        return cls(n, directed, np.full(nd, p), np.full(nd, q))

    @classmethod
    def uniform_pq(
        cls, n: int, p: float, q: float, directed: bool = False, allow_nondp: bool = False
    ) -> "MechanismParams":
        nd = dyad_count(n, directed)
        return cls(
            n, directed, np.full(nd, float(p)), np.full(nd, float(q)), allow_nondp=allow_nondp
        )

    # -- derived quantities ----------------------------------------------

    def eps_per_dyad(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            r = np.max(
                [
                    self.q / (1.0 - self.p),
                    (1.0 - self.p) / self.q,
                    (1.0 - self.q) / self.p,
                    self.p / (1.0 - self.q),
                ],
                axis=0,
            )
            return np.log(r)

    def eps_worst(self) -> float:
        return float(self.eps_per_dyad().max())

    def dense(self, flat: np.ndarray) -> np.ndarray:
        di, dj = dyad_endpoints(self.n, self.directed)
        out = np.zeros((self.n, self.n))
        out[di, dj] = flat
        if not self.directed:
            out[dj, di] = flat
        return out

    def risk_report(self) -> "RiskReport":
        per_dyad = self.eps_per_dyad()
        table = None
        if self.group_labels is not None:
            di, dj = dyad_endpoints(self.n, self.directed)
            gi, gj = self.group_labels[di], self.group_labels[dj]
            k = int(self.group_labels.max()) + 1
            table = np.full((k, k), -np.inf)
            for a in range(k):
                for b in range(k):
                    mask = (gi == a) & (gj == b)
                    if not self.directed:
                        mask |= (gi == b) & (gj == a)
                    if mask.any():
                        table[a, b] = per_dyad[mask].max()
        return RiskReport(eps_worst=float(per_dyad.max()), eps_table=table, per_dyad=per_dyad)


def build_mechanism(
    group_labels, eps_table, n: int | None = None, directed: bool = False
) -> MechanismParams:
    """Group-structured mechanism: dyad (i, j) gets the optimal corner for
    the eps of cell (group_i, group_j).  Labels are 0-based group ids."""
    labels = np.asarray(group_labels, dtype=np.int64)
    if n is None:
        n = labels.shape[0]
    if labels.shape != (n,):
        raise MechanismError(f"group labels must have one entry per node ({n})")
    table = np.asarray(eps_table, dtype=np.float64)
    k = int(labels.max()) + 1
    if labels.min() < 0:
        raise MechanismError("group labels must be >= 0")
    if table.shape != (k, k):
        raise MechanismError(f"eps table must be ({k}, {k}) for {k} groups")
    if not directed and not np.allclose(table, table.T):
        raise MechanismError("eps table must be symmetric for undirected graphs")
    if np.any(table <= 0):
        raise MechanismError("all eps entries must be positive")
    di, dj = dyad_endpoints(n, directed)
    cell_eps = table[labels[di], labels[dj]]
    p = np.exp(cell_eps) / (1.0 + np.exp(cell_eps))
    return MechanismParams(
        n, directed, p, p.copy(), group_labels=labels, eps_table=table
    )


@dataclass
class RiskReport:
    """Worst-case and per-group privacy loss of a mechanism."""

    eps_worst: float
    eps_table: np.ndarray | None
    per_dyad: np.ndarray

    def render_text(self, group_names: tuple[str, ...] | None = None) -> str:
        lines = [f"worst-case edge privacy loss: eps = {_fmt_eps(self.eps_worst)}"]
        if self.eps_table is not None:
            k = self.eps_table.shape[0]
            names = group_names or tuple(str(g + 1) for g in range(k))
            symmetric = _symmetric(self.eps_table)
            lines.append("per-group-pair eps:")
            for a in range(k):
                for b in range(a if symmetric else 0, k):
                    value = self.eps_table[a, b]
                    if value > 0:
                        lines.append(f"  ({names[a]}, {names[b]}): {_fmt_eps(value)}")
        return "\n".join(lines) + "\n"


def _symmetric(t: np.ndarray) -> bool:
    return bool(np.allclose(t, t.T, equal_nan=True))


def _fmt_eps(e: float) -> str:
    if math.isinf(e):
        return "inf (non-private)"
    return f"{e:.6g}"


# -- mechanism application -------------------------------------------------


def release(x: Graph, gamma: MechanismParams, seed: int) -> Graph:
    """Draw one synthetic graph from the mechanism.

    Uniforms come from a counter-based generator keyed by the seed and
    consumed in canonical dyad order, so a release is reproducible bit for
    bit regardless of how callers schedule work.
    """
    _check_shape(x, gamma)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed & (2**64 - 1))))
    u = rng.random(x.states.shape[0])
    y = np.where(x.states, u < gamma.p, u < 1.0 - gamma.q)
    return Graph(x.n, x.directed, y)


def log_mechanism_prob(y: Graph, x: Graph, gamma: MechanismParams) -> float:
    """log P(y | x) under the mechanism; -inf only in non-private mode."""
    _check_shape(x, gamma)
    _check_shape(y, gamma)
    xs, ys = x.states, y.states
    with np.errstate(divide="ignore"):
        lp = np.where(
            xs,
            np.where(ys, np.log(gamma.p), np.log1p(-gamma.p)),
            np.where(ys, np.log1p(-gamma.q), np.log(gamma.q)),
        )
    return float(lp.sum())


def conditional_llr(gamma: MechanismParams, y: Graph) -> np.ndarray:
    """Dense matrix of log P(y_ij | x_ij=1) - log P(y_ij | x_ij=0).

    This is the only mechanism quantity the conditional sampler needs: a
    toggle of dyad (i, j) multiplies the target by exp(+-llr[i, j]).
    """
    _check_shape(y, gamma)
    ys = y.states
    with np.errstate(divide="ignore"):
        llr = np.where(
            ys,
            np.log(gamma.p) - np.log1p(-gamma.q),
            np.log1p(-gamma.p) - np.log(gamma.q),
        )
    return gamma.dense(llr)


def _check_shape(g: Graph, gamma: MechanismParams):
    if g.n != gamma.n or g.directed != gamma.directed:
        raise MechanismError("graph and mechanism shapes differ")


# -- exhaustive verification ------------------------------------------------


@dataclass
class EdpCheck:
    """Result of brute-force privacy verification on a small graph space."""

    eps_max: float
    per_dyad: np.ndarray

    def restricted_max(self, dyad_mask) -> float:
        return float(self.per_dyad[np.asarray(dyad_mask, dtype=bool)].max())


def verify_edp(gamma: MechanismParams) -> EdpCheck:
    """Exhaustively compute max |log P(y|x) - log P(y|x')| over all outputs y
    and all neighboring graph pairs, without using the closed-form eps.

    Enumerates all 2^D graphs, so it is limited to D <= 12 dyads.
    """
    nd = dyad_count(gamma.n, gamma.directed)
    if nd > 12:
        raise MechanismError(f"exhaustive check needs <= 12 dyads, graph has {nd}")
    count = 1 << nd
    bits = ((np.arange(count)[:, None] >> np.arange(nd)[None, :]) & 1).astype(np.float64)
    with np.errstate(divide="ignore"):
        t11 = np.log(gamma.p)
        t10 = np.log1p(-gamma.p)
        t01 = np.log1p(-gamma.q)
        t00 = np.log(gamma.q)
    # L[xi, yi] = sum_d y_d * (x t11 + (1-x) t01) + (1-y_d) * (x t10 + (1-x) t00)
    a = bits * t11 + (1.0 - bits) * t01
    b = bits * t10 + (1.0 - bits) * t00
    L = a @ bits.T + b @ (1.0 - bits).T
    per_dyad = np.empty(nd)
    indices = np.arange(count)
    for d in range(nd):
        lo = indices[((indices >> d) & 1) == 0]
        hi = lo | (1 << d)
        diff = np.abs(L[lo] - L[hi])
        per_dyad[d] = diff.max()
    return EdpCheck(eps_max=float(per_dyad.max()), per_dyad=per_dyad)


# -- config text -------------------------------------------------------------
#
# Three accepted forms (comments with '#', whitespace free-form):
#   uniform eps=3.89
#   uniform p=0.98 q=0.95 [nondp]
#   groups attr=dept map{Legal=1, Trading=2, Other=2} table{(1,1)=3, (1,2)=6, (2,2)=6}

_BRACE_RE = re.compile(r"(\w+)\s*\{([^}]*)\}")
_KV_RE = re.compile(r"(\w+)\s*=\s*([^\s{}]+)")


def parse_mechanism(
    text: str, n: int, directed: bool = False, attrs: NodeAttributes | None = None
) -> MechanismParams:
    stripped = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    tokens = stripped.split()
    if not tokens:
        raise MechanismError("empty mechanism config")
    form = tokens[0]
    if form == "uniform":
        body = stripped.split(None, 1)[1] if len(stripped.split(None, 1)) > 1 else ""
        kv = dict(_KV_RE.findall(body))
        nondp = "nondp" in tokens[1:]
        if "eps" in kv:
            if nondp or "p" in kv or "q" in kv:
                raise MechanismError("uniform takes either eps=... or p=... q=...")
            return MechanismParams.uniform(n, _num(kv["eps"], "eps"), directed)
        if "p" in kv and "q" in kv:
            return MechanismParams.uniform_pq(
                n, _num(kv["p"], "p"), _num(kv["q"], "q"), directed, allow_nondp=nondp
            )
        raise MechanismError("uniform needs eps=<val> or p=<val> q=<val>")
    if form == "groups":
        kv = dict(_KV_RE.findall(re.sub(r"\{[^}]*\}", "", stripped)))
        braces = {name: body for name, body in _BRACE_RE.findall(stripped)}
        if "attr" not in kv or "map" not in braces or "table" not in braces:
            raise MechanismError("groups needs attr=<column> map{...} table{...}")
        if attrs is None:
            raise MechanismError("group mechanism needs a node attribute table")
        col = attrs.cat(kv["attr"])
        level_to_group: dict[str, int] = {}
        for part in _split_items(braces["map"]):
            level, sep, gid = part.partition("=")
            if not sep:
                raise MechanismError(f"bad map entry {part!r}, expected level=group")
            level_to_group[level.strip()] = int(gid)
        missing = [lv for lv in col.levels if lv not in level_to_group]
        if missing:
            raise MechanismError(f"map does not cover levels: {missing}")
        ids = sorted(set(level_to_group.values()))
        if ids != list(range(1, len(ids) + 1)):
            raise MechanismError(f"group ids must be 1..K without gaps, got {ids}")
        labels = np.array(
            [level_to_group[col.levels[c]] - 1 for c in col.codes], dtype=np.int64
        )
        k = len(ids)
        table = np.zeros((k, k))
        seen = np.zeros((k, k), dtype=bool)
        entry_re = re.compile(r"\((\d+)\s*,\s*(\d+)\)\s*=\s*([^\s,()]+)")
        leftover = entry_re.sub("", braces["table"]).replace(",", "").strip()
        if leftover:
            raise MechanismError(
                f"bad table entry near {leftover.split()[0]!r}, expected (g1,g2)=eps"
            )
        for m in entry_re.finditer(braces["table"]):
            a, b = int(m.group(1)) - 1, int(m.group(2)) - 1
            if not (0 <= a < k and 0 <= b < k):
                raise MechanismError(f"table entry {part!r} references unknown group")
            val = _num(m.group(3), "eps")
            table[a, b] = val
            seen[a, b] = True
            if not directed:
                table[b, a] = val
                seen[b, a] = True
        if not seen.all():
            raise MechanismError("table must give eps for every group pair")
        return build_mechanism(labels, table, n=n, directed=directed)
    raise MechanismError(f"unknown mechanism form {form!r}; expected 'uniform' or 'groups'")


def _split_items(body: str):
    return [p for p in (s.strip() for s in body.split(",")) if p]


def _num(tok: str, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MechanismError(f"bad {what} value {tok!r}") from None
