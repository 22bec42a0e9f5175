"""Immutable CSR graph, induced subgraphs, and edge-list / feature IO.

All node ids are dense 0-based integers.  Edge-list files with
arbitrary nonnegative ids are remapped by first appearance; the
mapping is returned so callers can emit it alongside their outputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form; immutable and safe to share.

    row_offsets is int64 of length num_nodes+1, col_indices is int32
    with each neighbor slice strictly increasing.  Symmetry and the
    absence of self-loops are constructor guarantees.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        self.row_offsets.setflags(write=False)
        self.col_indices.setflags(write=False)
        if self.features is not None:
            self.features.setflags(write=False)

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return self.col_indices.shape[0] // 2

    @property
    def feat_dim(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    def degree(self, v: int) -> int:
        return int(self.row_offsets[v + 1] - self.row_offsets[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted, duplicate-free neighbor ids of v (read-only view)."""
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range [0, {self.num_nodes})")
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return i < nbrs.shape[0] and nbrs[i] == v

    def edge_array(self) -> np.ndarray:
        """All undirected edges as an (m, 2) array with u < v, lexicographic."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int32), self.degrees)
        mask = src < self.col_indices
        return np.column_stack([src[mask], self.col_indices[mask]])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if self.num_nodes != other.num_nodes:
            return False
        if not (
            np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        ):
            return False
        if (self.features is None) != (other.features is None):
            return False
        return self.features is None or np.array_equal(self.features, other.features)


@dataclass(frozen=True)
class SubgraphSample:
    """Induced subgraph around one target pair.

    nodes holds the sorted global ids; local ids are their positions.
    local_adj carries no features (node inputs are assembled later from
    the parent graph).
    """

    nodes: np.ndarray
    local_adj: Graph
    u_local: int
    v_local: int
    source_edge_removed: bool = False

    def __post_init__(self):
        self.nodes.setflags(write=False)

    @property
    def num_local_nodes(self) -> int:
        return self.local_adj.num_nodes

    @property
    def num_local_edges(self) -> int:
        return self.local_adj.num_edges

    def __eq__(self, other) -> bool:
        if not isinstance(other, SubgraphSample):
            return NotImplemented
        return (
            np.array_equal(self.nodes, other.nodes)
            and self.local_adj == other.local_adj
            and self.u_local == other.u_local
            and self.v_local == other.v_local
            and self.source_edge_removed == other.source_edge_removed
        )


def build_graph(
    edge_list,
    num_nodes: int,
    features: np.ndarray | None = None,
) -> Graph:
    """Build a symmetric, deduplicated, sorted CSR graph.

    Duplicate and reversed-duplicate input edges collapse to a single
    undirected edge; self-loops are dropped with a counted warning.
    """
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if num_nodes < 0:
        raise DataError("num_nodes must be nonnegative")
    if edges.size:
        if edges.min() < 0 or edges.max() >= num_nodes:
            bad = edges.flat[np.argmax((edges < 0) | (edges >= num_nodes))]
            raise DataError(f"node id {bad} out of range [0, {num_nodes})")
        loops = edges[:, 0] == edges[:, 1]
        n_loops = int(loops.sum())
        if n_loops:
            log.warning("dropped %d self-loop(s) from edge list", n_loops)
            edges = edges[~loops]
    if edges.size:
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        keys = np.unique(lo * num_nodes + hi)
        lo, hi = keys // num_nodes, keys % num_nodes
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
    else:
        src = dst = np.empty(0, dtype=np.int64)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(row_offsets, src + 1, 1)
    row_offsets = np.cumsum(row_offsets, dtype=np.int64)
    if features is not None:
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != num_nodes:
            raise DataError(
                f"feature matrix has {features.shape[0] if features.ndim == 2 else '?'} "
                f"rows, expected {num_nodes}"
            )
    return Graph(num_nodes, row_offsets, dst.astype(np.int32), features)


def induced_subgraph(g: Graph, nodes, u: int, v: int) -> SubgraphSample:
    """Subgraph of g induced on `nodes`, tracking the target pair (u, v)."""
    nodes = np.unique(np.asarray(nodes, dtype=np.int32))
    if nodes.size and (nodes[0] < 0 or nodes[-1] >= g.num_nodes):
        raise DataError("induced node set contains out-of-range ids")
    u_local = int(np.searchsorted(nodes, u))
    v_local = int(np.searchsorted(nodes, v))
    if u_local >= nodes.size or nodes[u_local] != u:
        raise DataError(f"target node {u} not in induced node set")
    if v_local >= nodes.size or nodes[v_local] != v:
        raise DataError(f"target node {v} not in induced node set")
    local_offsets, local_cols = kernels.induced_csr(g.row_offsets, g.col_indices, nodes)
    local = Graph(nodes.size, local_offsets, local_cols)
    return SubgraphSample(nodes, local, u_local, v_local, source_edge_removed=False)


def read_edge_list(path) -> tuple[np.ndarray, int, np.ndarray]:
    """Parse an edge-list file ("u v" per line, '#' comments ignored).

    Returns (edges, num_nodes, id_map) where edges are in the dense
    internal id space assigned by first appearance and id_map[i] is the
    original id of internal node i.
    """
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise DataError(f"{path}:{ln}: expected 'u v', got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise DataError(f"{path}:{ln}: non-integer node id in {line!r}") from e
            if a < 0 or b < 0:
                raise DataError(f"{path}:{ln}: negative node id")
            raw.append((a, b))
    if not raw:
        raise DataError(f"{path}: no edges found")
    raw = np.asarray(raw, dtype=np.int64)
    id_map_list: list[int] = []
    remap: dict[int, int] = {}
    for orig in raw.ravel():
        o = int(orig)
        if o not in remap:
            remap[o] = len(id_map_list)
            id_map_list.append(o)
    edges = np.array([[remap[int(a)], remap[int(b)]] for a, b in raw], dtype=np.int64)
    return edges, len(id_map_list), np.asarray(id_map_list, dtype=np.int64)


def read_features(path, id_map: np.ndarray) -> np.ndarray:
    """Parse a feature file (original node id, then feat_dim reals per line).

    Rows are reordered into the internal id space; every mapped node
    must have a row, extra rows are ignored with a warning.
    """
    rows: dict[int, np.ndarray] = {}
    feat_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            orig = int(parts[0])
            vals = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            if feat_dim is None:
                feat_dim = vals.shape[0]
            elif vals.shape[0] != feat_dim:
                raise DataError(f"{path}:{ln}: feature row has {vals.shape[0]} values, expected {feat_dim}")
            rows[orig] = vals
    if feat_dim is None:
        raise DataError(f"{path}: no feature rows found")
    out = np.zeros((id_map.shape[0], feat_dim), dtype=np.float64)
    extra = set(rows) - set(int(x) for x in id_map)
    if extra:
        log.warning("%s: %d feature row(s) for unknown node ids ignored", path, len(extra))
    for i, orig in enumerate(id_map):
        o = int(orig)
        if o not in rows:
            raise DataError(f"{path}: missing feature row for node id {o}")
        out[i] = rows[o]
    return out


def write_node_map(id_map: np.ndarray, path) -> None:
    """Emit "original internal" id pairs, one per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sesample-nodemap v1\n")
        for internal, orig in enumerate(id_map):
            fh.write(f"{int(orig)} {internal}\n")


def check_csr(g: Graph) -> None:
    """Raise if CSR well-formedness or the undirected invariants fail."""
    ro, ci = g.row_offsets, g.col_indices
    if ro.shape[0] != g.num_nodes + 1 or ro[0] != 0 or ro[-1] != ci.shape[0]:
        raise AssertionError("row_offsets malformed")
    if np.any(np.diff(ro) < 0):
        raise AssertionError("row_offsets not nondecreasing")
    for v in range(g.num_nodes):
        nbrs = ci[ro[v] : ro[v + 1]]
        if nbrs.size and (np.any(np.diff(nbrs) <= 0) or nbrs[0] < 0 or nbrs[-1] >= g.num_nodes):
            raise AssertionError(f"neighbor slice of {v} not strictly increasing in range")
        if np.any(nbrs == v):
            raise AssertionError(f"self-loop at {v}")
    # symmetry
    src = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees)
    fwd = set(zip(src.tolist(), ci.tolist()))
    if any((b, a) not in fwd for a, b in fwd):
        raise AssertionError("adjacency not symmetric")


__all__ = [
    "DataError",
    "Graph",
    "SubgraphSample",
    "build_graph",
    "induced_subgraph",
    "read_edge_list",
    "read_features",
    "write_node_map",
    "check_csr",
]
