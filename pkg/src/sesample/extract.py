"""Enclosing-subgraph extraction around target pairs.

Two modes: exact h-hop neighborhoods found by two bounded BFS passes,
and sampled neighborhoods covered by k random walks of length h from
each endpoint.  Walks run on the extraction graph with the target edge
still present; the edge is stripped from the induced subgraph
afterwards so positive links never leak their own label.

Per-link randomness is a pure function of (seed, link_index, endpoint,
walk), so a batch extracts to the same samples under any schedule.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import DataError, Graph, SubgraphSample, induced_subgraph
from .rng import SplitMix64, derive_key


class ExtractionError(RuntimeError):
    """Failure while extracting one link of a batch (carries the index)."""


@dataclass(frozen=True)
class ExtractionConfig:
    mode: str
    h: int
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("bfs", "rw"):
            raise DataError(f"unknown extraction mode {self.mode!r}")
        if self.h < 1:
            raise DataError(f"walk length / hop count must be >= 1, got {self.h}")
        if self.mode == "rw" and self.k < 1:
            raise DataError(f"number of walks must be >= 1, got {self.k}")


def _check_pair(g: Graph, u: int, v: int) -> None:
    if not (0 <= u < g.num_nodes and 0 <= v < g.num_nodes):
        raise DataError(f"target pair ({u}, {v}) out of range [0, {g.num_nodes})")
    if u == v:
        raise DataError(f"target pair must be two distinct nodes, got ({u}, {v})")


def strip_target_edge(s: SubgraphSample) -> SubgraphSample:
    """Remove the (u, v) edge from the sample, if present, and flag it."""
    local = s.local_adj
    ro, ci = local.row_offsets, local.col_indices
    keep = np.ones(ci.shape[0], dtype=bool)
    removed = 0
    for a, b in ((s.u_local, s.v_local), (s.v_local, s.u_local)):
        lo, hi = ro[a], ro[a + 1]
        i = lo + np.searchsorted(ci[lo:hi], b)
        if i < hi and ci[i] == b:
            keep[i] = False
            removed += 1
    if removed:
        new_ci = ci[keep]
        new_ro = ro.copy()
        new_ro[s.u_local + 1 :] -= 1
        new_ro[s.v_local + 1 :] -= 1
        local = Graph(local.num_nodes, new_ro, new_ci)
    return SubgraphSample(s.nodes, local, s.u_local, s.v_local, source_edge_removed=True)


def bfs_enclosing(g: Graph, u: int, v: int, h: int) -> SubgraphSample:
    """Exact h-hop enclosing subgraph: nodes within h hops of u or of v."""
    _check_pair(g, u, v)
    if h < 1:
        raise DataError(f"hop count must be >= 1, got {h}")
    du = kernels.csr_bfs(g.row_offsets, g.col_indices, g.num_nodes, u, max_depth=h)
    dv = kernels.csr_bfs(g.row_offsets, g.col_indices, g.num_nodes, v, max_depth=h)
    nodes = np.where((du >= 0) | (dv >= 0))[0].astype(np.int32)
    return strip_target_edge(induced_subgraph(g, nodes, u, v))


def random_walk(g: Graph, start: int, h: int, stream: SplitMix64) -> np.ndarray:
    """One h-step uniform random walk; stops early at a degree-0 node."""
    if h < 1:
        raise DataError(f"walk length must be >= 1, got {h}")
    path = [start]
    cur = start
    for _ in range(h):
        nbrs = g.neighbors(cur)
        if nbrs.shape[0] == 0:
            break
        cur = int(nbrs[stream.next_below(nbrs.shape[0])])
        path.append(cur)
    return np.asarray(path, dtype=np.int32)


def rw_enclosing(
    g: Graph, u: int, v: int, cfg: ExtractionConfig, link_index: int = 0
) -> SubgraphSample:
    """Random-walk sampled enclosing subgraph: induced on the union of
    nodes visited by k h-step walks from each of u and v."""
    _check_pair(g, u, v)
    wu = kernels.walk_visits(
        g.row_offsets, g.col_indices, u, cfg.h, cfg.k, derive_key(cfg.seed, link_index, 0)
    )
    wv = kernels.walk_visits(
        g.row_offsets, g.col_indices, v, cfg.h, cfg.k, derive_key(cfg.seed, link_index, 1)
    )
    nodes = np.union1d(wu, wv)
    return strip_target_edge(induced_subgraph(g, nodes, u, v))


def extract_one(
    g: Graph, u: int, v: int, cfg: ExtractionConfig, link_index: int = 0
) -> SubgraphSample:
    if cfg.mode == "bfs":
        return bfs_enclosing(g, u, v, cfg.h)
    return rw_enclosing(g, u, v, cfg, link_index)


def extract_batch(g: Graph, instances, cfg: ExtractionConfig, threads: int = 1):
    """Extract one sample per instance, output order matching input order.

    instances is a sequence of objects with .u and .v (LinkInstance) or
    bare (u, v) pairs; link_index is the position in the sequence.
    Extraction is pure per link, so any thread count gives identical
    results.
    """
    pairs = [(inst.u, inst.v) if hasattr(inst, "u") else (inst[0], inst[1]) for inst in instances]

    def work(i: int) -> SubgraphSample:
        u, v = pairs[i]
        try:
            return extract_one(g, u, v, cfg, link_index=i)
        except Exception as e:
            raise ExtractionError(f"link {i} ({u}, {v}): {e}") from e

    if threads <= 1 or len(pairs) < 2:
        return [work(i) for i in range(len(pairs))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(len(pairs))))


__all__ = [
    "ExtractionConfig",
    "ExtractionError",
    "strip_target_edge",
    "bfs_enclosing",
    "random_walk",
    "rw_enclosing",
    "extract_one",
    "extract_batch",
]
