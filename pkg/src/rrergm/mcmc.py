"""Metropolis samplers over graphs: plain ERGM draws and draws conditioned
on a randomized-response release.

Both samplers share one compiled kernel; conditioning only contributes a
per-dyad log-likelihood-ratio to the acceptance rule.  Defaults follow the
dyad-count heuristic (burn-in 10*n^2, thinning interval n^2) and every knob
is overridable through ChainConfig.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .netgraph import Graph, NodeAttributes, dyad_endpoints
from .privacy import MechanismParams, conditional_llr
from .terms import CompiledModel, ModelSpec, compute_stats, _as_compiled

__all__ = ["ChainConfig", "SampleSet", "init_graph", "sample_ergm", "sample_conditional"]

PROPOSALS = ("uniform", "tnt")


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int | None = None      # default 10 * n^2
    interval: int | None = None     # default n^2
    draws: int = 1000
    proposal: str = "uniform"
    seed: int = 0
    store_graphs: bool = False

    def resolved(self, n: int) -> "ChainConfig":
        burn = 10 * n * n if self.burn_in is None else self.burn_in
        interval = n * n if self.interval is None else self.interval
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")
        if self.draws < 1 or interval < 1 or burn < 0:
            raise ValueError("need draws >= 1, interval >= 1, burn_in >= 0")
        return replace(self, burn_in=burn, interval=interval)


@dataclass
class SampleSet:
    """Thinned draws from one chain: statistic rows and optional graphs."""

    names: tuple[str, ...]
    stats: np.ndarray            # (draws, q)
    graphs: list[Graph] | None
    acceptance_rate: float
    final_graph: Graph

    @property
    def draws(self) -> int:
        return self.stats.shape[0]


def init_graph(
    n: int,
    directed: bool,
    strategy: str = "empty",
    seed: int = 0,
    density: float | None = None,
    reference: Graph | None = None,
) -> Graph:
    """Starting states for chains: empty, a copy of an observed graph, or a
    Bernoulli graph at a target density."""
    if strategy == "empty":
        return Graph.empty(n, directed)
    if strategy == "observed":
        if reference is None:
            raise ValueError("observed strategy needs a reference graph")
        if reference.n != n or reference.directed != directed:
            raise ValueError("reference graph shape mismatch")
        return reference
    if strategy == "density":
        if density is None or not 0.0 <= density <= 1.0:
            raise ValueError("density strategy needs density in [0, 1]")
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed & (2**64 - 1))))
        states = rng.random(len(Graph.empty(n, directed).states)) < density
        return Graph(n, directed, states)
    raise ValueError(f"unknown init strategy {strategy!r}")


def sample_ergm(
    model: ModelSpec | CompiledModel,
    theta,
    init: Graph,
    attrs: NodeAttributes | None = None,
    cfg: ChainConfig = ChainConfig(),
) -> SampleSet:
    """Thinned Metropolis draws from the ERGM with parameters theta."""
    cm = _as_compiled(model, init, attrs)
    mech_llr = np.zeros((cm.n, cm.n))
    return _run(cm, theta, init, mech_llr, cfg)


def sample_conditional(
    model: ModelSpec | CompiledModel,
    theta,
    gamma: MechanismParams,
    y: Graph,
    attrs: NodeAttributes | None = None,
    cfg: ChainConfig = ChainConfig(),
    init: Graph | None = None,
) -> SampleSet:
    """Draws from P(x | y) where x ~ ERGM(theta) passed through the mechanism.

    The acceptance rule needs only the per-dyad mechanism log-ratio, so each
    toggle costs the same as in the unconditional sampler.
    """
    if init is None:
        init = y
    cm = _as_compiled(model, init, attrs)
    mech_llr = conditional_llr(gamma, y)
    if not np.all(np.isfinite(mech_llr)):
        raise ValueError(
            "conditional sampling needs finite mechanism log-ratios; "
            "a non-private mechanism (p or q on the boundary) has none"
        )
    return _run(cm, theta, init, mech_llr, cfg)


def _run(cm: CompiledModel, theta, init: Graph, mech_llr: np.ndarray, cfg: ChainConfig) -> SampleSet:
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.shape != (cm.q,):
        raise ValueError(f"theta must have length {cm.q}, got {theta.shape}")
    cfg = cfg.resolved(cm.n)

    adj = np.ascontiguousarray(init.to_dense())
    if cm.directed:
        deg = adj.sum(axis=0, dtype=np.int64)
    else:
        deg = adj.sum(axis=1, dtype=np.int64)
    cur_stats = np.ascontiguousarray(compute_stats(cm, init))
    di, dj = dyad_endpoints(cm.n, cm.directed)
    nd = di.shape[0]

    edge_heads = np.zeros(nd, dtype=np.int64)
    edge_tails = np.zeros(nd, dtype=np.int64)
    epos = np.full((cm.n, cm.n), -1, dtype=np.int64)
    m = 0
    for i, j in zip(di[init.states], dj[init.states]):
        edge_heads[m] = i
        edge_tails[m] = j
        epos[i, j] = m
        m += 1

    stats_out = np.empty((cfg.draws, cm.q))
    if cfg.store_graphs:
        graphs_out = np.empty((cfg.draws, cm.n, cm.n), dtype=np.uint8)
    else:
        graphs_out = np.empty((1, 1, 1), dtype=np.uint8)

    accepted, total, _ = _kernels.run_chain(
        adj,
        deg,
        m,
        cur_stats,
        cm.dyadcov,
        theta,
        cm.mutual_idx,
        cm.gwesp_idx,
        float(np.exp(cm.gwesp_decay)),
        float(1.0 - np.exp(-cm.gwesp_decay)),
        cm.degpop_idx,
        cm.directed,
        di,
        dj,
        np.ascontiguousarray(mech_llr),
        cfg.proposal == "tnt",
        cfg.burn_in,
        cfg.interval,
        cfg.draws,
        np.uint64(cfg.seed & (2**64 - 1)),
        stats_out,
        graphs_out,
        cfg.store_graphs,
        edge_heads,
        edge_tails,
        epos,
    )

    graphs = None
    if cfg.store_graphs:
        graphs = [Graph.from_dense(graphs_out[k], cm.directed) for k in range(cfg.draws)]
    return SampleSet(
        names=cm.names,
        stats=stats_out,
        graphs=graphs,
        acceptance_rate=accepted / max(total, 1),
        final_graph=Graph.from_dense(adj, cm.directed),
    )
