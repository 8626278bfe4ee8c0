"""JIT-compiled Metropolis kernel shared by the model and conditional samplers.

One kernel serves both targets: the conditional-on-release sampler only adds
a per-dyad log-likelihood-ratio matrix to the acceptance log-ratio (zeros
for plain model sampling).  Randomness comes from an explicit xoshiro256**
stream owned by the chain, so concurrent chains cannot interfere and a chain
replays exactly from its 64-bit seed.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_U = np.uint64
_GOLD = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U(64) - k))


@njit(cache=True)
def _seed_state(seed):
    """Expand a 64-bit seed into xoshiro256** state via splitmix64."""
    state = np.empty(4, dtype=np.uint64)
    s = _U(seed)
    for i in range(4):
        s = s + _GOLD
        z = s
        z = (z ^ (z >> _U(30))) * _MIX1
        z = (z ^ (z >> _U(27))) * _MIX2
        state[i] = z ^ (z >> _U(31))
    return state


@njit(cache=True, inline="always")
def _next64(state):
    result = _rotl(state[1] * _U(5), _U(7)) * _U(9)
    t = state[1] << _U(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], _U(45))
    return result


@njit(cache=True, inline="always")
def _uniform(state):
    return (_next64(state) >> _U(11)) * 1.1102230246251565e-16  # 2^-53


@njit(cache=True, inline="always")
def _pop_change(d, up):
    """Change in d^(3/2) when one edge is added to / removed from a node of degree d."""
    if up:
        return (d + 1.0) ** 1.5 - float(d) ** 1.5
    return (d - 1.0) ** 1.5 - float(d) ** 1.5


@njit(cache=True, inline="always")
def _toggle_delta(
    adj, deg, dyadcov, i, j, adding,
    mutual_idx, gwesp_idx, gw_eptau, gw_c, degpop_idx, directed, dg,
):
    """Fill dg with g(x toggled) - g(x); O(degree) for the structural terms."""
    q = dyadcov.shape[0]
    sign = 1.0 if adding else -1.0
    for k in range(q):
        dg[k] = sign * dyadcov[k, i, j]
    if mutual_idx >= 0:
        dg[mutual_idx] += sign * adj[j, i]
    if degpop_idx >= 0:
        if directed:
            dg[degpop_idx] += _pop_change(deg[j], adding)
        else:
            dg[degpop_idx] += _pop_change(deg[i], adding) + _pop_change(deg[j], adding)
    if gwesp_idx >= 0:
        n = adj.shape[0]
        spij = 0
        extra = 0.0
        for h in range(n):
            if h == i or h == j:
                continue
            if adj[i, h] == 1 and adj[j, h] == 1:
                spij += 1
                # Counts include the toggled dyad itself when the edge is
                # present (removal case), which the exponent shift below
                # corrects; when adding, that slot contributes nothing.
                sp_ih = 0
                sp_jh = 0
                for t in range(n):
                    if adj[h, t] == 1:
                        if adj[i, t] == 1:
                            sp_ih += 1
                        if adj[j, t] == 1:
                            sp_jh += 1
                if adding:
                    extra += gw_c**sp_ih + gw_c**sp_jh
                else:
                    extra += gw_c ** (sp_ih - 1) + gw_c ** (sp_jh - 1)
        dg[gwesp_idx] += sign * (gw_eptau * (1.0 - gw_c**spij) + extra)


@njit(cache=True, nogil=True)
def run_chain(
    adj, deg, edge_count, cur_stats,
    dyadcov, theta,
    mutual_idx, gwesp_idx, gw_eptau, gw_c, degpop_idx,
    directed,
    dyad_i, dyad_j,
    mech_llr,
    use_tnt,
    burn_in, interval, draws,
    seed,
    stats_out, graphs_out, store_graphs,
    edge_heads, edge_tails, epos,
):
    """Run burn_in + draws*interval toggle steps, recording thinned statistics.

    Mutates adj, deg, cur_stats, and the edge bookkeeping in place; returns
    (accepted steps, total steps, final edge count).
    """
    n = adj.shape[0]
    q = dyadcov.shape[0]
    nd = dyad_i.shape[0]
    state = _seed_state(seed)
    dg = np.empty(q)
    total = burn_in + draws * interval
    m = edge_count
    accepted = 0
    draw_idx = 0

    for step in range(total):
        # -- propose a dyad ------------------------------------------------
        from_tie = False
        if use_tnt and m > 0 and _uniform(state) < 0.5:
            e = int(_uniform(state) * m)
            if e == m:
                e = m - 1
            i = edge_heads[e]
            j = edge_tails[e]
            from_tie = True
        else:
            d = int(_uniform(state) * nd)
            if d == nd:
                d = nd - 1
            i = dyad_i[d]
            j = dyad_j[d]

        adding = adj[i, j] == 0
        _toggle_delta(
            adj, deg, dyadcov, i, j, adding,
            mutual_idx, gwesp_idx, gw_eptau, gw_c, degpop_idx, directed, dg,
        )

        logr = 0.0
        for k in range(q):
            logr += theta[k] * dg[k]
        if adding:
            logr += mech_llr[i, j]
        else:
            logr -= mech_llr[i, j]

        if use_tnt:
            # Exact proposal-probability ratio, including the m == 0 and
            # m == 1 corners where the tie branch is unavailable.
            if adding:
                fwd = 1.0 / nd if m == 0 else 0.5 / nd
                rev = 0.5 / (m + 1.0) + 0.5 / nd
            else:
                fwd = 0.5 / m + 0.5 / nd
                rev = 1.0 / nd if m == 1 else 0.5 / nd
            logr += np.log(rev) - np.log(fwd)

        if np.log(_uniform(state)) < logr:
            accepted += 1
            for k in range(q):
                cur_stats[k] += dg[k]
            if adding:
                adj[i, j] = 1
                if not directed:
                    adj[j, i] = 1
                    deg[i] += 1
                    deg[j] += 1
                else:
                    deg[j] += 1
                edge_heads[m] = i
                edge_tails[m] = j
                epos[i, j] = m
                m += 1
            else:
                adj[i, j] = 0
                if not directed:
                    adj[j, i] = 0
                    deg[i] -= 1
                    deg[j] -= 1
                else:
                    deg[j] -= 1
                pos = epos[i, j]
                m -= 1
                if pos != m:
                    li = edge_heads[m]
                    lj = edge_tails[m]
                    edge_heads[pos] = li
                    edge_tails[pos] = lj
                    epos[li, lj] = pos
                epos[i, j] = -1

        if step >= burn_in and (step - burn_in + 1) % interval == 0:
            for k in range(q):
                stats_out[draw_idx, k] = cur_stats[k]
            if store_graphs:
                for a in range(n):
                    for b in range(n):
                        graphs_out[draw_idx, a, b] = adj[a, b]
            draw_idx += 1

    return accepted, total, m
