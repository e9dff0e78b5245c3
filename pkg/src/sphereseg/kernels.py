"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a pure-numpy/scipy reference implementation
(``*_numpy``) and a numba ``@njit`` version (``*_numba``). The active backend
is chosen at import time: numba when it is importable, unless the environment
variable ``SPHERESEG_DISABLE_NUMBA`` is set to a non-empty value. Both
backends produce identical results (the test suite asserts this), so the flag
only trades speed.

All kernels are single-threaded with a fixed loop order so that repeated runs
are bit-identical.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _scipy_components
from scipy.sparse.csgraph import dijkstra as _scipy_dijkstra

_INF = np.inf

try:
    import numba
    from numba import njit

    _NUMBA_IMPORTABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay runnable
    _NUMBA_IMPORTABLE = False

NUMBA_ENABLED = _NUMBA_IMPORTABLE and not os.environ.get("SPHERESEG_DISABLE_NUMBA")


# ---------------------------------------------------------------- gather/scatter

def gather_rows_numpy(x, idx):
    """out[n, k, :] = x[idx[n, k], :] for an (N, K) index matrix."""
    return x[idx]


def scatter_add_rows_numpy(grad_out, idx, n_rows):
    """Transpose of gather_rows: accumulate grad_out[n, k, :] into row idx[n, k]."""
    n, k, c = grad_out.shape
    out = np.zeros((n_rows, c), dtype=grad_out.dtype)
    np.add.at(out, idx.ravel(), grad_out.reshape(n * k, c))
    return out


def group_max_numpy(x, groups):
    """Per-group column-wise max over rows of x.

    groups is (G, W) with member row indices; rows are sorted ascending so the
    first occurrence of the max is the smallest vertex index. Returns the max
    values (G, C) and the winning position within each group (G, C).
    """
    gathered = x[groups]                       # (G, W, C)
    arg = np.argmax(gathered, axis=1)          # first max along W
    out = np.take_along_axis(gathered, arg[:, None, :], axis=1)[:, 0, :]
    return out, arg.astype(np.int32)


def group_max_backward_numpy(grad, groups, argpos, n_rows):
    g, c = grad.shape
    out = np.zeros((n_rows, c), dtype=grad.dtype)
    rows = np.take_along_axis(groups, argpos.astype(np.int64), axis=1)  # (G, C)
    cols = np.broadcast_to(np.arange(c), (g, c))
    np.add.at(out, (rows.ravel(), cols.ravel()), grad.ravel())
    return out


def group_mean_numpy(x, groups):
    """Per-group column-wise mean over rows of x; groups is (G, W)."""
    return x[groups].mean(axis=1)


def group_mean_backward_numpy(grad, groups, n_rows):
    g, w = groups.shape
    c = grad.shape[1]
    out = np.zeros((n_rows, c), dtype=grad.dtype)
    scaled = grad * (np.asarray(1.0, dtype=grad.dtype) / w)
    np.add.at(out, groups.ravel(), np.repeat(scaled[:, None, :], w, axis=1).reshape(g * w, c))
    return out


# ---------------------------------------------------------------- graph kernels

def dijkstra_numpy(indptr, indices, weights, sources, n_vertices):
    """Multi-source shortest-path distances over a CSR graph (scipy backend)."""
    if len(sources) == 0:
        return np.full(n_vertices, _INF)
    graph = csr_matrix((weights, indices, indptr), shape=(n_vertices, n_vertices))
    dist = _scipy_dijkstra(graph, directed=False, indices=np.asarray(sources), min_only=True)
    return np.asarray(dist, dtype=np.float64)


def label_components_numpy(indptr, indices, active):
    """Connected components of the subgraph induced by active vertices.

    Returns int32 labels (consecutive from 0 in order of smallest member
    vertex); inactive vertices get -1.
    """
    n = active.shape[0]
    act = active.astype(bool)
    sub = np.flatnonzero(act)
    labels = np.full(n, -1, dtype=np.int32)
    if sub.size == 0:
        return labels
    remap = np.full(n, -1, dtype=np.int64)
    remap[sub] = np.arange(sub.size)
    rows, cols = [], []
    for v in sub:
        nb = indices[indptr[v]:indptr[v + 1]]
        nb = nb[act[nb]]
        rows.append(np.full(nb.size, remap[v]))
        cols.append(remap[nb])
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    adj = csr_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(sub.size, sub.size))
    _, comp = _scipy_components(adj, directed=False)
    # relabel by first occurrence so labels match the scan-order convention
    order = np.full(comp.max() + 1, -1, dtype=np.int32)
    nxt = 0
    for c in comp:
        if order[c] < 0:
            order[c] = nxt
            nxt += 1
    labels[sub] = order[comp]
    return labels


if _NUMBA_IMPORTABLE:

    @njit(cache=True)
    def gather_rows_numba(x, idx):
        n, k = idx.shape
        c = x.shape[1]
        out = np.empty((n, k, c), dtype=x.dtype)
        for i in range(n):
            for j in range(k):
                src = idx[i, j]
                for ch in range(c):
                    out[i, j, ch] = x[src, ch]
        return out

    @njit(cache=True)
    def scatter_add_rows_numba(grad_out, idx, n_rows):
        n, k, c = grad_out.shape
        out = np.zeros((n_rows, c), dtype=grad_out.dtype)
        for i in range(n):
            for j in range(k):
                dst = idx[i, j]
                for ch in range(c):
                    out[dst, ch] += grad_out[i, j, ch]
        return out

    @njit(cache=True)
    def group_max_numba(x, groups):
        g, w = groups.shape
        c = x.shape[1]
        out = np.empty((g, c), dtype=x.dtype)
        arg = np.empty((g, c), dtype=np.int32)
        for i in range(g):
            for ch in range(c):
                best = x[groups[i, 0], ch]
                pos = 0
                for j in range(1, w):
                    v = x[groups[i, j], ch]
                    if v > best:  # strict: keeps first occurrence on ties
                        best = v
                        pos = j
                out[i, ch] = best
                arg[i, ch] = pos
        return out, arg

    @njit(cache=True)
    def group_max_backward_numba(grad, groups, argpos, n_rows):
        g, c = grad.shape
        out = np.zeros((n_rows, c), dtype=grad.dtype)
        for i in range(g):
            for ch in range(c):
                out[groups[i, argpos[i, ch]], ch] += grad[i, ch]
        return out

    @njit(cache=True)
    def group_mean_numba(x, groups):
        g, w = groups.shape
        c = x.shape[1]
        out = np.zeros((g, c), dtype=x.dtype)
        inv = 1.0 / w
        for i in range(g):
            for j in range(w):
                src = groups[i, j]
                for ch in range(c):
                    out[i, ch] += x[src, ch]
            for ch in range(c):
                out[i, ch] *= inv
        return out

    @njit(cache=True)
    def group_mean_backward_numba(grad, groups, n_rows):
        g, w = groups.shape
        c = grad.shape[1]
        out = np.zeros((n_rows, c), dtype=grad.dtype)
        inv = 1.0 / w
        for i in range(g):
            for j in range(w):
                dst = groups[i, j]
                for ch in range(c):
                    out[dst, ch] += grad[i, ch] * inv
        return out

    @njit(cache=True)
    def dijkstra_numba(indptr, indices, weights, sources, n_vertices):
        dist = np.full(n_vertices, _INF)
        if sources.shape[0] == 0:
            return dist
        # array-based binary min-heap of (distance, vertex)
        cap = 4 * n_vertices
        heap_d = np.empty(cap, dtype=np.float64)
        heap_v = np.empty(cap, dtype=np.int64)
        size = 0
        for s in sources:
            dist[s] = 0.0
            heap_d[size] = 0.0
            heap_v[size] = s
            size += 1
            i = size - 1
            while i > 0:
                parent = (i - 1) // 2
                if heap_d[i] < heap_d[parent]:
                    heap_d[i], heap_d[parent] = heap_d[parent], heap_d[i]
                    heap_v[i], heap_v[parent] = heap_v[parent], heap_v[i]
                    i = parent
                else:
                    break
        while size > 0:
            d = heap_d[0]
            v = heap_v[0]
            size -= 1
            heap_d[0] = heap_d[size]
            heap_v[0] = heap_v[size]
            i = 0
            while True:
                left = 2 * i + 1
                right = left + 1
                smallest = i
                if left < size and heap_d[left] < heap_d[smallest]:
                    smallest = left
                if right < size and heap_d[right] < heap_d[smallest]:
                    smallest = right
                if smallest == i:
                    break
                heap_d[i], heap_d[smallest] = heap_d[smallest], heap_d[i]
                heap_v[i], heap_v[smallest] = heap_v[smallest], heap_v[i]
                i = smallest
            if d > dist[v]:
                continue  # stale entry
            for e in range(indptr[v], indptr[v + 1]):
                u = indices[e]
                nd = d + weights[e]
                if nd < dist[u]:
                    dist[u] = nd
                    if size == cap:  # grow (rare)
                        new_d = np.empty(cap * 2, dtype=np.float64)
                        new_v = np.empty(cap * 2, dtype=np.int64)
                        new_d[:size] = heap_d[:size]
                        new_v[:size] = heap_v[:size]
                        heap_d = new_d
                        heap_v = new_v
                        cap *= 2
                    heap_d[size] = nd
                    heap_v[size] = u
                    size += 1
                    i = size - 1
                    while i > 0:
                        parent = (i - 1) // 2
                        if heap_d[i] < heap_d[parent]:
                            heap_d[i], heap_d[parent] = heap_d[parent], heap_d[i]
                            heap_v[i], heap_v[parent] = heap_v[parent], heap_v[i]
                            i = parent
                        else:
                            break
        return dist

    @njit(cache=True)
    def label_components_numba(indptr, indices, active):
        n = active.shape[0]
        labels = np.full(n, -1, dtype=np.int32)
        queue = np.empty(n, dtype=np.int64)
        current = 0
        for start in range(n):
            if not active[start] or labels[start] >= 0:
                continue
            labels[start] = current
            queue[0] = start
            head = 0
            tail = 1
            while head < tail:
                v = queue[head]
                head += 1
                for e in range(indptr[v], indptr[v + 1]):
                    u = indices[e]
                    if active[u] and labels[u] < 0:
                        labels[u] = current
                        queue[tail] = u
                        tail += 1
            current += 1
        return labels


if NUMBA_ENABLED:
    gather_rows = gather_rows_numba
    scatter_add_rows = scatter_add_rows_numba
    group_max = group_max_numba
    group_max_backward = group_max_backward_numba
    group_mean = group_mean_numba
    group_mean_backward = group_mean_backward_numba
    label_components = label_components_numba

    def dijkstra(indptr, indices, weights, sources, n_vertices):
        return dijkstra_numba(indptr, indices, weights,
                              np.asarray(sources, dtype=np.int64), n_vertices)
else:
    gather_rows = gather_rows_numpy
    scatter_add_rows = scatter_add_rows_numpy
    group_max = group_max_numpy
    group_max_backward = group_max_backward_numpy
    group_mean = group_mean_numpy
    group_mean_backward = group_mean_backward_numpy
    dijkstra = dijkstra_numpy
    label_components = label_components_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
