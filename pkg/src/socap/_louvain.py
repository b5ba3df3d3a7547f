"""Numba kernels: Louvain on CSR graphs and batched ego-network modularity.

Graphs are passed as (indptr, indices, weights, loops) where ``loops[i]`` is
the adjacency-matrix diagonal A_ii (twice the internal weight of a
super-node). Original graphs carry unit weights and zero loops.
"""

import numpy as np
from numba import njit

_GAIN_EPS = 1e-9
_MAX_SWEEPS = 10_000


@njit(cache=True)
def _next(state):
    # splitmix64
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _shuffle(order, state):
    for i in range(order.shape[0] - 1, 0, -1):
        j = np.int64(_next(state) % np.uint64(i + 1))
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp


@njit(cache=True)
def _relabel(comm):
    """Map labels to 0..K-1 in order of first appearance."""
    n = comm.shape[0]
    lut = np.full(n, -1, np.int64)
    out = np.empty(n, np.int64)
    k = 0
    for i in range(n):
        c = comm[i]
        if lut[c] < 0:
            lut[c] = k
            k += 1
        out[i] = lut[c]
    return out, k


@njit(cache=True)
def _local_moves(indptr, indices, weights, loops, state):
    n = indptr.shape[0] - 1
    k = np.empty(n)
    for i in range(n):
        s = loops[i]
        for p in range(indptr[i], indptr[i + 1]):
            s += weights[p]
        k[i] = s
    m2 = k.sum()
    comm = np.arange(n)
    tot = k.copy()
    if m2 == 0.0:
        return comm, False
    neigh_w = np.zeros(n)
    neigh_mark = np.full(n, -1, np.int64)
    neigh_list = np.empty(n, np.int64)
    order = np.arange(n)
    _shuffle(order, state)
    moved_any = False
    for _sweep in range(_MAX_SWEEPS):
        moves = 0
        for t in range(n):
            i = order[t]
            ci = comm[i]
            nn = 0
            for p in range(indptr[i], indptr[i + 1]):
                c = comm[indices[p]]
                if neigh_mark[c] != i:
                    neigh_mark[c] = i
                    neigh_w[c] = 0.0
                    neigh_list[nn] = c
                    nn += 1
                neigh_w[c] += weights[p]
            ki = k[i]
            tot[ci] -= ki
            own_w = neigh_w[ci] if neigh_mark[ci] == i else 0.0
            best_c = ci
            best_gain = own_w - tot[ci] * ki / m2
            for q in range(nn):
                c = neigh_list[q]
                if c == ci:
                    continue
                gain = neigh_w[c] - tot[c] * ki / m2
                if gain > best_gain + _GAIN_EPS:
                    best_c = c
                    best_gain = gain
                elif best_c != ci and c < best_c and abs(gain - best_gain) <= _GAIN_EPS:
                    best_c = c
                    best_gain = gain
            tot[best_c] += ki
            if best_c != ci:
                comm[i] = best_c
                moves += 1
        if moves == 0:
            break
        moved_any = True
    return comm, moved_any


@njit(cache=True)
def _aggregate(indptr, indices, weights, loops, comm, nc):
    n = indptr.shape[0] - 1
    new_loops = np.zeros(nc)
    m = indices.shape[0]
    keys = np.empty(m, np.int64)
    vals = np.empty(m)
    cnt = 0
    for i in range(n):
        ci = comm[i]
        new_loops[ci] += loops[i]
        for p in range(indptr[i], indptr[i + 1]):
            cj = comm[indices[p]]
            if cj == ci:
                new_loops[ci] += weights[p]
            else:
                keys[cnt] = ci * nc + cj
                vals[cnt] = weights[p]
                cnt += 1
    keys = keys[:cnt]
    vals = vals[:cnt]
    order = np.argsort(keys, kind="mergesort")
    new_indptr = np.zeros(nc + 1, np.int64)
    new_indices = np.empty(cnt, np.int64)
    new_weights = np.empty(cnt)
    e = -1
    last = -1
    for t in range(cnt):
        key = keys[order[t]]
        if key != last:
            e += 1
            last = key
            new_indices[e] = key % nc
            new_weights[e] = 0.0
            new_indptr[key // nc + 1] += 1
        new_weights[e] += vals[order[t]]
    for c in range(nc):
        new_indptr[c + 1] += new_indptr[c]
    return new_indptr, new_indices[:e + 1], new_weights[:e + 1], new_loops


@njit(cache=True)
def louvain_csr(indptr, indices, seed):
    """Labels 0..K-1 (first-appearance order) for an unweighted CSR graph."""
    n = indptr.shape[0] - 1
    state = np.empty(1, np.uint64)
    state[0] = seed
    labels = np.arange(n)
    w = np.ones(indices.shape[0])
    loops = np.zeros(n)
    ip, ix = indptr, indices
    while True:
        comm, moved = _local_moves(ip, ix, w, loops, state)
        if not moved:
            break
        comm, nc = _relabel(comm)
        for i in range(n):
            labels[i] = comm[labels[i]]
        if nc == ip.shape[0] - 1:
            break
        ip, ix, w, loops = _aggregate(ip, ix, w, loops, comm, nc)
    out, _ = _relabel(labels)
    return out


@njit(cache=True)
def newman_modularity_csr(indptr, indices, labels):
    """Standard degree-based modularity of ``labels`` (0 for an edgeless graph)."""
    n = indptr.shape[0] - 1
    m2 = indices.shape[0]
    if m2 == 0:
        return 0.0
    kmax = 0
    for i in range(n):
        if labels[i] + 1 > kmax:
            kmax = labels[i] + 1
    within = np.zeros(kmax)
    deg = np.zeros(kmax)
    for i in range(n):
        ci = labels[i]
        deg[ci] += indptr[i + 1] - indptr[i]
        for p in range(indptr[i], indptr[i + 1]):
            if labels[indices[p]] == ci:
                within[ci] += 1.0
    q = 0.0
    for c in range(kmax):
        q += within[c] / m2 - (deg[c] / m2) ** 2
    return q


@njit(cache=True)
def _alters_csr(indptr, indices, codes, ego, internal_only):
    """Local CSR of the ego's alters (ego excluded), alters in global index order."""
    lo, hi = indptr[ego], indptr[ego + 1]
    if internal_only:
        cnt = 0
        for p in range(lo, hi):
            if codes[indices[p]] == codes[ego]:
                cnt += 1
        alters = np.empty(cnt, np.int64)
        cnt = 0
        for p in range(lo, hi):
            if codes[indices[p]] == codes[ego]:
                alters[cnt] = indices[p]
                cnt += 1
    else:
        alters = indices[lo:hi].copy()
    d = alters.shape[0]
    counts = np.zeros(d + 1, np.int64)
    for a in range(d):
        g = alters[a]
        for p in range(indptr[g], indptr[g + 1]):
            j = indices[p]
            pos = np.searchsorted(alters, j)
            if pos < d and alters[pos] == j:
                counts[a + 1] += 1
    for a in range(d):
        counts[a + 1] += counts[a]
    local = np.empty(counts[d], np.int64)
    fill = counts[:d].copy()
    for a in range(d):
        g = alters[a]
        for p in range(indptr[g], indptr[g + 1]):
            j = indices[p]
            pos = np.searchsorted(alters, j)
            if pos < d and alters[pos] == j:
                local[fill[a]] = pos
                fill[a] += 1
    return counts, local


@njit(cache=True)
def ego_modularity_batch(indptr, indices, codes, egos, seeds, internal_only):
    """Per-ego (Q_ego, n_alters, n_alter_edges, K_ego) over the alters subgraph."""
    m = egos.shape[0]
    q = np.zeros(m)
    n_alters = np.zeros(m, np.int64)
    n_edges = np.zeros(m, np.int64)
    n_comm = np.zeros(m, np.int64)
    for t in range(m):
        ip, ix = _alters_csr(indptr, indices, codes, egos[t], internal_only)
        d = ip.shape[0] - 1
        n_alters[t] = d
        n_edges[t] = ix.shape[0] // 2
        if d == 0:
            continue
        if ix.shape[0] == 0:
            n_comm[t] = d
            continue
        lab = louvain_csr(ip, ix, seeds[t])
        n_comm[t] = lab.max() + 1
        q[t] = newman_modularity_csr(ip, ix, lab)
    return q, n_alters, n_edges, n_comm
