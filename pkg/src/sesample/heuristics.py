"""Parameter-free link scorers: common neighbors, Adamic-Adar, PPR.

All scorers operate on the observed graph (training positives only)
and are symmetric in the pair.  PPR is computed by power iteration
with restart; alpha is the probability of following an edge (0.15
restart mass at alpha=0.85) and dangling mass returns to the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DataError, Graph

PPR_MAX_ITERS = 1000


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach tolerance within the cap."""


@dataclass(frozen=True)
class HeuristicKind:
    kind: str
    ppr_alpha: float = 0.85
    ppr_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("CN", "AA", "PPR"):
            raise DataError(f"unknown heuristic kind {self.kind!r}")
        if not 0.0 < self.ppr_alpha < 1.0:
            raise DataError(f"ppr_alpha must be in (0, 1), got {self.ppr_alpha}")
        if self.ppr_tol <= 0.0:
            raise DataError(f"ppr_tol must be > 0, got {self.ppr_tol}")


def common_neighbors(g: Graph, u: int, v: int) -> int:
    """|N(u) ∩ N(v)| via sorted-merge intersection."""
    return int(np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True).size)


def adamic_adar(g: Graph, u: int, v: int) -> float:
    """Sum of 1/ln(deg(w)) over common neighbors w.

    A common neighbor of degree 1 is structurally impossible (it
    touches both u and v), but corrupted inputs must not produce a
    division by ln(1); such terms are skipped.
    """
    common = np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True)
    if common.size == 0:
        return 0.0
    degs = g.degrees[common]
    degs = degs[degs > 1]
    return float(np.sum(1.0 / np.log(degs)))


def ppr_vector(g: Graph, source: int, alpha: float = 0.85, tol: float = 1e-6) -> np.ndarray:
    """Personalized PageRank vector with restart at source."""
    n = g.num_nodes
    degs = g.degrees.astype(np.float64)
    src_ids = np.repeat(np.arange(n, dtype=np.int64), g.degrees)
    dangling = degs == 0.0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, degs))
    p = np.zeros(n, dtype=np.float64)
    p[source] = 1.0
    for _ in range(PPR_MAX_ITERS):
        w = p * inv_deg
        nxt = np.zeros(n, dtype=np.float64)
        np.add.at(nxt, g.col_indices, alpha * w[src_ids])
        nxt[source] += (1.0 - alpha) + alpha * p[dangling].sum()
        if np.abs(nxt - p).sum() < tol:
            return nxt
        p = nxt
    raise ConvergenceError(
        f"PPR did not converge in {PPR_MAX_ITERS} iterations (tol={tol}); "
        "the tolerance is likely pathological"
    )


def ppr_score(g: Graph, u: int, v: int, alpha: float = 0.85, tol: float = 1e-6) -> float:
    """Symmetric score pi_u[v] + pi_v[u] (link direction is undefined)."""
    if g.num_edges == 0:
        raise DataError("PPR requires a graph with at least one edge")
    return float(ppr_vector(g, u, alpha, tol)[v] + ppr_vector(g, v, alpha, tol)[u])


def score_instances(g: Graph, instances, kind: HeuristicKind) -> np.ndarray:
    """Score each instance pair on g, order preserved.

    PPR vectors are cached per source node within the call.
    """
    out = np.empty(len(instances), dtype=np.float64)
    if kind.kind == "CN":
        for i, inst in enumerate(instances):
            out[i] = common_neighbors(g, inst.u, inst.v)
    elif kind.kind == "AA":
        for i, inst in enumerate(instances):
            out[i] = adamic_adar(g, inst.u, inst.v)
    else:
        cache: dict[int, np.ndarray] = {}

        def vec(s: int) -> np.ndarray:
            if s not in cache:
                cache[s] = ppr_vector(g, s, kind.ppr_alpha, kind.ppr_tol)
            return cache[s]

        if g.num_edges == 0:
            raise DataError("PPR requires a graph with at least one edge")
        for i, inst in enumerate(instances):
            out[i] = vec(inst.u)[inst.v] + vec(inst.v)[inst.u]
    return out


__all__ = [
    "HeuristicKind",
    "ConvergenceError",
    "PPR_MAX_ITERS",
    "common_neighbors",
    "adamic_adar",
    "ppr_vector",
    "ppr_score",
    "score_instances",
]
