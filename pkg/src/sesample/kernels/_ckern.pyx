# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernel core.

Bitwise twin of _pure.py: same BFS distances, same splitmix64 walk
sequences, same induced CSR layout.  Loops run without the GIL so
batch extraction can use real thread parallelism.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

BACKEND = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15UL
cdef uint64_t MIX_A = 0xBF58476D1CE4E5B9UL
cdef uint64_t MIX_B = 0x94D049BB133111EBUL


cdef inline uint64_t mix64(uint64_t x) nogil:
    x = (x ^ (x >> 30)) * MIX_A
    x = (x ^ (x >> 27)) * MIX_B
    return x ^ (x >> 31)


def csr_bfs(const int64_t[:] row_offsets,
            const int32_t[:] col_indices,
            int num_nodes,
            int source,
            int max_depth=-1,
            int excluded=-1):
    """BFS distances from source; -1 marks unreachable nodes."""
    cdef cnp.ndarray[int32_t, ndim=1] dist = np.full(num_nodes, -1, dtype=np.int32)
    cdef cnp.ndarray[int32_t, ndim=1] queue = np.empty(num_nodes, dtype=np.int32)
    cdef int32_t[:] dist_v = dist
    cdef int32_t[:] queue_v = queue
    cdef Py_ssize_t head = 0, tail = 0
    cdef int32_t cur, nb, d
    cdef int64_t e

    if source == excluded:
        return dist
    with nogil:
        dist_v[source] = 0
        queue_v[tail] = source
        tail += 1
        while head < tail:
            cur = queue_v[head]
            head += 1
            d = dist_v[cur]
            if max_depth >= 0 and d >= max_depth:
                continue
            for e in range(row_offsets[cur], row_offsets[cur + 1]):
                nb = col_indices[e]
                if dist_v[nb] == -1 and nb != excluded:
                    dist_v[nb] = d + 1
                    queue_v[tail] = nb
                    tail += 1
    return dist


def walk_visits(const int64_t[:] row_offsets,
                const int32_t[:] col_indices,
                int start,
                int walk_len,
                int num_walks,
                object key_base):
    """Sorted unique visit set of num_walks walks of walk_len steps."""
    cdef cnp.ndarray[int32_t, ndim=1] buf = np.empty(
        1 + <Py_ssize_t>num_walks * walk_len, dtype=np.int32)
    cdef int32_t[:] buf_v = buf
    cdef uint64_t base = <uint64_t>(<unsigned long long>key_base)
    cdef uint64_t state
    cdef Py_ssize_t n_out = 1
    cdef int w, step
    cdef int32_t cur
    cdef int64_t lo, deg

    with nogil:
        buf_v[0] = start
        for w in range(num_walks):
            state = mix64(base + <uint64_t>w + GOLDEN)
            cur = start
            for step in range(walk_len):
                lo = row_offsets[cur]
                deg = row_offsets[cur + 1] - lo
                if deg == 0:
                    break
                state = state + GOLDEN
                cur = col_indices[lo + <int64_t>(mix64(state) % <uint64_t>deg)]
                buf_v[n_out] = cur
                n_out += 1
    return np.unique(buf[:n_out])


def induced_csr(const int64_t[:] row_offsets,
                const int32_t[:] col_indices,
                const int32_t[:] nodes):
    """CSR of the subgraph induced on `nodes` (sorted global ids)."""
    cdef Py_ssize_t n_local = nodes.shape[0]
    cdef cnp.ndarray[int64_t, ndim=1] local_offsets = np.zeros(n_local + 1, dtype=np.int64)
    cdef int64_t[:] lo_v = local_offsets
    cdef Py_ssize_t i, cnt
    cdef int64_t e
    cdef int32_t v, nb
    cdef Py_ssize_t lo_b, hi_b, mid
    cdef cnp.ndarray[int32_t, ndim=1] local_cols
    cdef int32_t[:] lc_v
    cdef Py_ssize_t out = 0

    # first pass counts surviving edges per row (membership: binary search)
    with nogil:
        for i in range(n_local):
            v = nodes[i]
            cnt = 0
            for e in range(row_offsets[v], row_offsets[v + 1]):
                nb = col_indices[e]
                lo_b = 0
                hi_b = n_local
                while lo_b < hi_b:
                    mid = (lo_b + hi_b) >> 1
                    if nodes[mid] < nb:
                        lo_b = mid + 1
                    else:
                        hi_b = mid
                if lo_b < n_local and nodes[lo_b] == nb:
                    cnt += 1
            lo_v[i + 1] = lo_v[i] + cnt

    local_cols = np.empty(local_offsets[n_local], dtype=np.int32)
    lc_v = local_cols
    with nogil:
        for i in range(n_local):
            v = nodes[i]
            for e in range(row_offsets[v], row_offsets[v + 1]):
                nb = col_indices[e]
                lo_b = 0
                hi_b = n_local
                while lo_b < hi_b:
                    mid = (lo_b + hi_b) >> 1
                    if nodes[mid] < nb:
                        lo_b = mid + 1
                    else:
                        hi_b = mid
                if lo_b < n_local and nodes[lo_b] == nb:
                    lc_v[out] = <int32_t>lo_b
                    out += 1
    return local_offsets, local_cols
