"""Numba kernels for the hot paths: CART growth and tree routing.

The grower uses an inline splitmix64 RNG so per-tree results depend only on
the integer seed, never on thread scheduling or numpy RNG internals.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U = np.uint64


@njit(cache=True)
def _next_u64(state):
    state[0] += _U(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


@njit(cache=True)
def _rand_below(state, n):
    return np.int64(_next_u64(state) % _U(n))


@njit(cache=True)
def grow_variance_tree(x, y, rows0, min_node_size, mtry, seed, bootstrap):
    """Grow one CART tree; returns (feature, threshold, left, right, value).

    feature[i] == -1 marks a leaf. Splits maximize variance reduction; ties
    break toward the lower feature index, then the lower threshold.
    """
    p = x.shape[1]
    state = np.empty(1, dtype=np.uint64)
    state[0] = _U(seed)
    _next_u64(state)  # decorrelate nearby seeds

    m0 = rows0.shape[0]
    work = np.empty(m0, dtype=np.int64)
    if bootstrap:
        for i in range(m0):
            work[i] = rows0[_rand_below(state, m0)]
    else:
        for i in range(m0):
            work[i] = rows0[i]

    max_nodes = 4 * (m0 // min_node_size + 2)
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)

    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_lo = np.empty(max_nodes, dtype=np.int64)
    stack_hi = np.empty(max_nodes, dtype=np.int64)
    perm = np.empty(p, dtype=np.int64)
    scratch = np.empty(m0, dtype=np.int64)

    n_nodes = 1
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        m = hi - lo

        tot = 0.0
        tot2 = 0.0
        for i in range(lo, hi):
            yi = y[work[i]]
            tot += yi
            tot2 += yi * yi
        if m < 2 * min_node_size:
            value[node] = tot / m
            continue
        parent_sse = tot2 - tot * tot / m

        kf = mtry if mtry < p else p
        for j in range(p):
            perm[j] = j
        for j in range(kf):
            r = j + _rand_below(state, p - j)
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
        feats = np.sort(perm[:kf])

        best_score = 0.0
        best_f = -1
        best_thr = 0.0
        v = np.empty(m)
        for jf in range(kf):
            f = feats[jf]
            for i in range(m):
                v[i] = x[work[lo + i], f]
            order = np.argsort(v)
            csum = 0.0
            csum2 = 0.0
            for k in range(1, m):
                yi = y[work[lo + order[k - 1]]]
                csum += yi
                csum2 += yi * yi
                lo_val = v[order[k - 1]]
                hi_val = v[order[k]]
                if hi_val > lo_val and k >= min_node_size and m - k >= min_node_size:
                    sse = (csum2 - csum * csum / k) + (
                        (tot2 - csum2) - (tot - csum) * (tot - csum) / (m - k)
                    )
                    score = parent_sse - sse
                    if score > best_score:
                        best_score = score
                        best_f = f
                        best_thr = (lo_val + hi_val) / 2.0
        if best_f < 0:
            value[node] = tot / m
            continue

        # partition work[lo:hi] by the chosen threshold, keeping encounter order
        nl = 0
        nr = 0
        for i in range(lo, hi):
            if x[work[i], best_f] <= best_thr:
                scratch[nl] = work[i]
                nl += 1
            else:
                scratch[m0 - 1 - nr] = work[i]
                nr += 1
        for i in range(nl):
            work[lo + i] = scratch[i]
        for i in range(nr):
            work[lo + nl + i] = scratch[m0 - 1 - i]

        feature[node] = best_f
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack_node[sp] = right_id
        stack_lo[sp] = lo + nl
        stack_hi[sp] = hi
        sp += 1
        stack_node[sp] = left_id
        stack_lo[sp] = lo
        stack_hi[sp] = lo + nl
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True)
def route_rows(feature, threshold, left, right, x):
    """Leaf node id for every row of x."""
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
