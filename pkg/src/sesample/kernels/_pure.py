"""Pure numpy fallback for the CSR kernel core.

Semantics here are the reference: the compiled backend in _ckern.pyx
must produce bitwise-identical outputs (same BFS distances, same walk
sequences, same induced CSR arrays) on every input.
"""

from __future__ import annotations

import numpy as np

from ..rng import _GOLDEN, _MASK64, _mix64

BACKEND = "pure"


def csr_bfs(
    row_offsets: np.ndarray,
    col_indices: np.ndarray,
    num_nodes: int,
    source: int,
    max_depth: int = -1,
    excluded: int = -1,
) -> np.ndarray:
    """BFS distances from source; -1 marks unreachable nodes.

    max_depth >= 0 stops the expansion at that many hops; excluded >= 0
    removes one node from the graph (it keeps distance -1 and is never
    traversed).
    """
    dist = np.full(num_nodes, -1, dtype=np.int32)
    if source == excluded:
        return dist
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    depth = 0
    while frontier.size and (max_depth < 0 or depth < max_depth):
        chunks = [
            col_indices[row_offsets[v] : row_offsets[v + 1]] for v in frontier
        ]
        nxt = np.unique(np.concatenate(chunks)) if chunks else np.array([], dtype=np.int32)
        nxt = nxt[dist[nxt] == -1]
        if excluded >= 0:
            nxt = nxt[nxt != excluded]
        if nxt.size == 0:
            break
        depth += 1
        dist[nxt] = depth
        frontier = nxt.astype(np.int64)
    return dist


def walk_visits(
    row_offsets: np.ndarray,
    col_indices: np.ndarray,
    start: int,
    walk_len: int,
    num_walks: int,
    key_base: int,
) -> np.ndarray:
    """Nodes visited by num_walks random walks of walk_len steps from start.

    Returns the sorted unique visit set (always contains start).  Each
    walk draws from the splitmix64 stream keyed by (key_base, walk);
    a zero-degree node terminates its walk early.
    """
    ro = row_offsets.tolist()
    visited = [start]
    for w in range(num_walks):
        state = _mix64((key_base + w + _GOLDEN) & _MASK64)
        cur = start
        for _ in range(walk_len):
            lo = ro[cur]
            deg = ro[cur + 1] - lo
            if deg == 0:
                break
            state = (state + _GOLDEN) & _MASK64
            cur = int(col_indices[lo + _mix64(state) % deg])
            visited.append(cur)
    return np.unique(np.asarray(visited, dtype=np.int32))


def induced_csr(
    row_offsets: np.ndarray,
    col_indices: np.ndarray,
    nodes: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """CSR of the subgraph induced on `nodes` (sorted global ids).

    Local ids follow the sort order of `nodes`; neighbor slices stay
    sorted because the global-to-local map is monotone.
    """
    n_local = nodes.shape[0]
    local_offsets = np.zeros(n_local + 1, dtype=np.int64)
    cols_out = []
    for i in range(n_local):
        v = nodes[i]
        nbrs = col_indices[row_offsets[v] : row_offsets[v + 1]]
        pos = np.searchsorted(nodes, nbrs)
        pos[pos >= n_local] = n_local - 1
        keep = nodes[pos] == nbrs
        local_nbrs = pos[keep]
        cols_out.append(local_nbrs)
        local_offsets[i + 1] = local_offsets[i] + local_nbrs.shape[0]
    if cols_out:
        local_cols = np.concatenate(cols_out).astype(np.int32, copy=False)
    else:
        local_cols = np.empty(0, dtype=np.int32)
    return local_offsets, local_cols
