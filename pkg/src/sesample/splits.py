"""Edge splitting, negative sampling, and split-file persistence.

The protocol: undirected positive edges are partitioned by a seeded
shuffle into train/val/test fractions, the observed graph is rebuilt
from training positives only, and each split is balanced 1:1 with
uniformly sampled non-edges.  Negatives are checked against the FULL
graph's edge set (never against the observed graph) so a "negative"
can never be a held-out positive, and no pair is ever reused across
splits or labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .graph import DataError, Graph, build_graph
from .rng import derive_seed

SPLIT_NAMES = ("train", "val", "test")

SPLITS_HEADER = "# sesample-splits v1"


@dataclass(frozen=True)
class LinkInstance:
    u: int
    v: int
    label: int
    split: Literal["train", "val", "test"]


@dataclass(frozen=True)
class SplitSet:
    instances: tuple[LinkInstance, ...]
    observed_graph: Graph
    seed: int

    def split_instances(self, split: str) -> list[LinkInstance]:
        return [i for i in self.instances if i.split == split]


def _pair_keys(pairs: np.ndarray, n: int) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
    return lo * n + hi


def sample_negatives(g: Graph, count: int, seed: int, exclusions=()) -> np.ndarray:
    """Uniformly sample `count` distinct non-edges of g as (count, 2) pairs.

    exclusions is a collection of (u, v) pairs (typically negatives
    drawn for earlier splits) that must not be re-drawn.  Rejection
    sampling is used on sparse graphs; when non-edges are scarce the
    sampler falls back to explicit enumeration, which always
    terminates.
    """
    n = g.num_nodes
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    total_pairs = n * (n - 1) // 2
    edge_keys = _pair_keys(g.edge_array(), n) if g.num_edges else np.empty(0, dtype=np.int64)
    if exclusions is not None and len(exclusions):
        excl = np.asarray(sorted(exclusions), dtype=np.int64).reshape(-1, 2)
        if np.any(excl[:, 0] == excl[:, 1]):
            raise DataError("exclusion set contains a self-loop pair")
        excl_keys = np.unique(_pair_keys(excl, n))
        excl_keys = excl_keys[~np.isin(excl_keys, edge_keys)]
    else:
        excl_keys = np.empty(0, dtype=np.int64)
    available = total_pairs - edge_keys.shape[0] - excl_keys.shape[0]
    if count > available:
        raise DataError(
            f"cannot sample {count} negatives: only {available} non-edges available"
        )
    forbidden = np.unique(np.concatenate([edge_keys, excl_keys]))
    rng = np.random.default_rng(seed)

    density = g.num_edges / total_pairs if total_pairs else 1.0
    if density > 0.5 or 2 * count > available:
        # scarce regime: enumerate every candidate, shuffle, take the head
        cand = []
        for u in range(n):
            row = np.arange(u + 1, n, dtype=np.int64)
            keys = u * n + row
            keep = row[~np.isin(keys, forbidden)]
            if keep.size:
                cand.append(np.column_stack([np.full(keep.size, u, dtype=np.int64), keep]))
        pool = np.concatenate(cand) if cand else np.empty((0, 2), dtype=np.int64)
        order = rng.permutation(pool.shape[0])
        return pool[order[:count]]

    chosen: list[tuple[int, int]] = []
    seen: set[int] = set()
    while len(chosen) < count:
        need = count - len(chosen)
        batch = max(256, 2 * need)
        us = rng.integers(0, n, size=batch, dtype=np.int64)
        vs = rng.integers(0, n, size=batch, dtype=np.int64)
        ok = us != vs
        us, vs = us[ok], vs[ok]
        lo, hi = np.minimum(us, vs), np.maximum(us, vs)
        keys = lo * n + hi
        fresh = ~np.isin(keys, forbidden)
        for a, b, k in zip(lo[fresh], hi[fresh], keys[fresh]):
            if k not in seen:
                seen.add(int(k))
                chosen.append((int(a), int(b)))
                if len(chosen) == count:
                    break
    return np.asarray(chosen, dtype=np.int64)


def split_edges(g: Graph, ratios=(0.85, 0.05, 0.10), seed: int = 0) -> SplitSet:
    """Partition g's edges into seeded train/val/test splits with 1:1 negatives."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise DataError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {sum(ratios)}")
    m = g.num_edges
    if m == 0:
        raise DataError("cannot split a graph with zero edges")

    edges = g.edge_array().astype(np.int64)
    rng = np.random.default_rng(derive_seed(seed, "split-shuffle"))
    edges = edges[rng.permutation(m)]

    n_train = math.floor(ratios[0] * m)
    n_val = math.floor(ratios[1] * m)
    pos = {
        "train": edges[:n_train],
        "val": edges[n_train : n_train + n_val],
        "test": edges[n_train + n_val :],
    }
    observed = build_graph(pos["train"], g.num_nodes)

    neg: dict[str, np.ndarray] = {}
    drawn: set[tuple[int, int]] = set()
    for name in SPLIT_NAMES:
        neg[name] = sample_negatives(
            g, pos[name].shape[0], derive_seed(seed, f"negatives-{name}"), exclusions=drawn
        )
        drawn.update((int(a), int(b)) for a, b in neg[name])

    instances: list[LinkInstance] = []
    for name in SPLIT_NAMES:
        for u, v in pos[name]:
            instances.append(LinkInstance(int(u), int(v), 1, name))
        for u, v in neg[name]:
            instances.append(LinkInstance(int(u), int(v), 0, name))
    return SplitSet(tuple(instances), observed, seed)


def write_splits(s: SplitSet, path) -> None:
    """Persist a SplitSet as the versioned "u v label split" text format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{SPLITS_HEADER} seed={s.seed} nodes={s.observed_graph.num_nodes}\n")
        for inst in s.instances:
            fh.write(f"{inst.u} {inst.v} {inst.label} {inst.split}\n")


def read_splits(path) -> SplitSet:
    """Parse a split file; the observed graph is rebuilt from train positives."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(SPLITS_HEADER):
            raise DataError(f"{path}:1: not a sesample splits file")
        fields = dict(
            tok.split("=", 1) for tok in header[len(SPLITS_HEADER) :].split() if "=" in tok
        )
        try:
            seed = int(fields["seed"])
            num_nodes = int(fields["nodes"])
        except (KeyError, ValueError) as e:
            raise DataError(f"{path}:1: malformed header {header!r}") from e
        instances: list[LinkInstance] = []
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataError(f"{path}:{ln}: expected 'u v label split'")
            u, v, label, split = parts
            try:
                u, v, label = int(u), int(v), int(label)
            except ValueError as e:
                raise DataError(f"{path}:{ln}: non-integer field") from e
            if label not in (0, 1):
                raise DataError(f"{path}:{ln}: label must be 0 or 1, got {label}")
            if split not in SPLIT_NAMES:
                raise DataError(f"{path}:{ln}: unknown split tag {split!r}")
            instances.append(LinkInstance(u, v, label, split))
    train_pos = np.array(
        [(i.u, i.v) for i in instances if i.split == "train" and i.label == 1], dtype=np.int64
    ).reshape(-1, 2)
    observed = build_graph(train_pos, num_nodes)
    return SplitSet(tuple(instances), observed, seed)


__all__ = [
    "LinkInstance",
    "SplitSet",
    "SPLIT_NAMES",
    "sample_negatives",
    "split_edges",
    "write_splits",
    "read_splits",
]
