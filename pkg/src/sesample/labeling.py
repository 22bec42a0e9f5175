"""Double-radius node labeling and node-input assembly.

Each node of an extracted sample is labeled by an integer hash of its
two geodesic distances to the targets, each distance computed with the
other target removed from the subgraph.  Targets get label 1; a node
that cannot reach both targets under that isolation rule gets 0.
Labels are one-hot encoded (clamped at a cap) and concatenated with
the node's global feature row to form the model input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .graph import DataError, Graph, SubgraphSample, build_graph

DEFAULT_LABEL_CAP = 100


@dataclass(frozen=True)
class LabeledSubgraph:
    sample: SubgraphSample
    labels: np.ndarray
    node_input: np.ndarray | None = None

    def __post_init__(self):
        self.labels.setflags(write=False)
        if self.node_input is not None:
            self.node_input.setflags(write=False)

    def with_node_input(self, node_input: np.ndarray) -> "LabeledSubgraph":
        return replace(self, node_input=node_input)


def drnl_hash(d_xu: int, d_xv: int) -> int:
    """Integer label for a node at isolated distances (d_xu, d_xv).

    1 + min(d_xu, d_xv) + floor(d/2) * ceil(d/2 - 1) with d = d_xu + d_xv.
    """
    if d_xu < 1 or d_xv < 1:
        raise DataError(f"distances must be >= 1, got ({d_xu}, {d_xv})")
    d = d_xu + d_xv
    return 1 + min(d_xu, d_xv) + (d // 2) * ((d - 1) // 2)


def zero_one_labels(s: SubgraphSample) -> np.ndarray:
    """Degenerate labeling trick: targets 1, everyone else 0."""
    labels = np.zeros(s.num_local_nodes, dtype=np.int64)
    labels[s.u_local] = 1
    labels[s.v_local] = 1
    return labels


def label_subgraph(s: SubgraphSample, scheme: str = "drnl") -> LabeledSubgraph:
    """Label every node of the sample; node_input stays unassembled."""
    if scheme == "zero-one":
        return LabeledSubgraph(s, zero_one_labels(s))
    if scheme != "drnl":
        raise DataError(f"unknown labeling scheme {scheme!r}")
    local = s.local_adj
    du = kernels.csr_bfs(
        local.row_offsets, local.col_indices, local.num_nodes, s.u_local, excluded=s.v_local
    ).astype(np.int64)
    dv = kernels.csr_bfs(
        local.row_offsets, local.col_indices, local.num_nodes, s.v_local, excluded=s.u_local
    ).astype(np.int64)
    d = du + dv
    labels = 1 + np.minimum(du, dv) + (d // 2) * ((d - 1) // 2)
    labels[(du < 0) | (dv < 0)] = 0
    labels[s.u_local] = 1
    labels[s.v_local] = 1
    return LabeledSubgraph(s, labels)


def label_cap_policy(labeled: list[LabeledSubgraph], lo: int = 10, hi: int = DEFAULT_LABEL_CAP) -> int:
    """One-hot width policy: max training label clamped into [lo, hi]."""
    peak = 0
    for ls in labeled:
        if ls.labels.size:
            peak = max(peak, int(ls.labels.max()))
    return int(min(max(peak, lo), hi))


def assemble_node_input(ls: LabeledSubgraph, g: Graph, label_cap: int) -> np.ndarray:
    """Per-node input rows: one_hot(min(label, cap)) ++ global features."""
    if label_cap < 1:
        raise DataError(f"label cap must be >= 1, got {label_cap}")
    n = ls.sample.num_local_nodes
    onehot = np.zeros((n, label_cap + 1), dtype=np.float64)
    onehot[np.arange(n), np.clip(ls.labels, 0, label_cap)] = 1.0
    if g.features is None:
        return onehot
    if g.features.shape[0] != g.num_nodes:
        raise DataError("feature matrix row count does not match graph")
    return np.hstack([onehot, g.features[ls.sample.nodes]])


def assemble_batch(labeled: list[LabeledSubgraph], g: Graph, label_cap: int) -> list[LabeledSubgraph]:
    return [ls.with_node_input(assemble_node_input(ls, g, label_cap)) for ls in labeled]


def write_bundle(labeled: list[LabeledSubgraph], path) -> None:
    """Write the line-oriented bundle format.

    Per sample: "S n_local n_edges u_local v_local", then "N global_id
    label" per node in local order, then "E a b" per undirected local
    edge with a < b, lexicographic.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for ls in labeled:
            s = ls.sample
            edges = s.local_adj.edge_array()
            fh.write(f"S {s.num_local_nodes} {edges.shape[0]} {s.u_local} {s.v_local}\n")
            for gid, lab in zip(s.nodes, ls.labels):
                fh.write(f"N {gid} {lab}\n")
            for a, b in edges:
                fh.write(f"E {a} {b}\n")


def read_bundle(path) -> list[LabeledSubgraph]:
    """Parse a bundle file back into labeled samples (node_input unset).

    Bundles are written after target-edge stripping, so samples are
    reconstructed with source_edge_removed=True.
    """
    out: list[LabeledSubgraph] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(ln, l.strip()) for ln, l in enumerate(fh, start=1)]
    lines = [(ln, l) for ln, l in lines if l and not l.startswith("#")]
    i = 0
    while i < len(lines):
        ln, line = lines[i]
        parts = line.split()
        if parts[0] != "S" or len(parts) != 5:
            raise DataError(f"{path}:{ln}: expected sample header 'S n m u v'")
        n_local, n_edges, u_local, v_local = map(int, parts[1:])
        if i + n_local + n_edges >= len(lines):
            raise DataError(f"{path}:{ln}: truncated sample")
        nodes = np.empty(n_local, dtype=np.int32)
        labels = np.empty(n_local, dtype=np.int64)
        for j in range(n_local):
            ln2, nl = lines[i + 1 + j]
            np_parts = nl.split()
            if np_parts[0] != "N" or len(np_parts) != 3:
                raise DataError(f"{path}:{ln2}: expected node line 'N global_id label'")
            nodes[j] = int(np_parts[1])
            labels[j] = int(np_parts[2])
        if n_local > 1 and np.any(np.diff(nodes) <= 0):
            raise DataError(f"{path}:{ln}: node ids must be strictly increasing")
        edges = np.empty((n_edges, 2), dtype=np.int64)
        for j in range(n_edges):
            ln2, el = lines[i + 1 + n_local + j]
            ep = el.split()
            if ep[0] != "E" or len(ep) != 3:
                raise DataError(f"{path}:{ln2}: expected edge line 'E a b'")
            edges[j] = (int(ep[1]), int(ep[2]))
        local = build_graph(edges, n_local)
        sample = SubgraphSample(nodes, local, u_local, v_local, source_edge_removed=True)
        out.append(LabeledSubgraph(sample, labels))
        i += 1 + n_local + n_edges
    return out


__all__ = [
    "DEFAULT_LABEL_CAP",
    "LabeledSubgraph",
    "drnl_hash",
    "zero_one_labels",
    "label_subgraph",
    "label_cap_policy",
    "assemble_node_input",
    "assemble_batch",
    "write_bundle",
    "read_bundle",
]
