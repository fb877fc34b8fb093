"""Numba kernels for incremental change statistics and Metropolis-Hastings.

Chain state is a dense adjacency matrix ``adj``, the shared-partner matrix
``sp = adj @ adj``, the degree vector, and an edge list ``elist[:m]`` of
dyad indices with inverse positions ``pos`` (``-1`` for non-edges) so that a
uniformly random edge can be drawn in O(1).
"""
import math

import numpy as np
from numba import njit

EDGES, GWESP, GWDEGREE, NODEMATCH = 0, 1, 2, 3


@njit(cache=True)
def change_stats(adj, sp, deg, i, j, kinds, decays, attr_idx, codes, out):
    # effect of adding {i, j}; counts below are taken with the dyad switched off
    n = adj.shape[0]
    on = adj[i, j]
    for t in range(kinds.shape[0]):
        kind = kinds[t]
        if kind == EDGES:
            out[t] = 1.0
        elif kind == GWESP:
            tau = decays[t]
            r = 1.0 - math.exp(-tau)
            val = 1.0 - r ** sp[i, j]
            for k in range(n):
                if adj[i, k] and adj[j, k]:
                    s = sp[i, k] - on
                    val += r**s - r ** (s + 1)
                    s = sp[j, k] - on
                    val += r**s - r ** (s + 1)
            out[t] = math.exp(tau) * val
        elif kind == GWDEGREE:
            tau = decays[t]
            r = 1.0 - math.exp(-tau)
            di = deg[i] - on
            dj = deg[j] - on
            out[t] = math.exp(tau) * (r**di - r ** (di + 1) + r**dj - r ** (dj + 1))
        else:
            a = attr_idx[t]
            out[t] = 1.0 if codes[a, i] == codes[a, j] else 0.0


@njit(cache=True)
def apply_toggle(adj, sp, deg, elist, pos, m, d, i, j):
    """Flip dyad ``d = {i, j}`` in place; returns the new edge count."""
    n = adj.shape[0]
    on = adj[i, j]
    delta = -1 if on else 1
    for k in range(n):
        if k != i and adj[j, k]:
            sp[i, k] += delta
            sp[k, i] += delta
        if k != j and adj[i, k]:
            sp[j, k] += delta
            sp[k, j] += delta
    adj[i, j] = 1 - on
    adj[j, i] = 1 - on
    deg[i] += delta
    deg[j] += delta
    if on:
        p = pos[d]
        last = elist[m - 1]
        elist[p] = last
        pos[last] = p
        pos[d] = -1
        return m - 1
    elist[m] = d
    pos[d] = m
    return m + 1


@njit(cache=True)
def run_chain(
    adj, sp, deg, elist, pos, m, rows, cols,
    theta, kinds, decays, attr_idx, codes, dyad_offset, cur,
    uniforms, edge_prob, interval, out_stats, out_dyads, keep_dyads,
):
    """Advance the chain ``uniforms.shape[0]`` steps.

    After every ``interval`` steps the current statistics (and, when
    ``keep_dyads``, the dyad vector) are written to the next output row.
    ``edge_prob = 0`` gives the plain uniform dyad-toggle proposal; a
    positive value gives tie/no-tie mixing, which proposes a uniformly
    chosen existing edge with that probability and otherwise a uniform dyad.
    ``dyad_offset[d]`` is added to the log target when dyad ``d`` is switched
    on (pass zeros for a plain ERGM); it may be infinite.

    Returns ``(m, accepted)``.
    """
    N = rows.shape[0]
    q = kinds.shape[0]
    delta = np.empty(q)
    accepted = 0
    row = 0
    for step in range(uniforms.shape[0]):
        u0 = uniforms[step, 0]
        u1 = uniforms[step, 1]
        u2 = uniforms[step, 2]
        if edge_prob > 0.0 and m > 0 and u0 < edge_prob:
            d = elist[min(int(u1 * m), m - 1)]
        else:
            d = min(int(u1 * N), N - 1)
        i = rows[d]
        j = cols[d]
        on = adj[i, j]
        change_stats(adj, sp, deg, i, j, kinds, decays, attr_idx, codes, delta)
        dot = 0.0
        for t in range(q):
            dot += theta[t] * delta[t]
        dot += dyad_offset[d]
        log_ratio = -dot if on else dot
        if edge_prob > 0.0:
            if on:
                q_fwd = edge_prob / m + (1.0 - edge_prob) / N
                q_rev = (1.0 - edge_prob) / N if m > 1 else 1.0 / N
            else:
                q_fwd = (1.0 - edge_prob) / N if m > 0 else 1.0 / N
                q_rev = edge_prob / (m + 1) + (1.0 - edge_prob) / N
            log_ratio += math.log(q_rev / q_fwd)
        if log_ratio >= 0.0 or u2 < math.exp(log_ratio):
            sign = -1.0 if on else 1.0
            for t in range(q):
                cur[t] += sign * delta[t]
            m = apply_toggle(adj, sp, deg, elist, pos, m, d, i, j)
            accepted += 1
        if interval > 0 and (step + 1) % interval == 0:
            for t in range(q):
                out_stats[row, t] = cur[t]
            if keep_dyads:
                for k in range(N):
                    out_dyads[row, k] = adj[rows[k], cols[k]]
            row += 1
    return m, accepted
