from collections import deque

import numpy as np
import pytest

from sesample import (
    DataError,
    ExtractionConfig,
    build_graph,
    drnl_hash,
    induced_subgraph,
    label_subgraph,
    rw_enclosing,
    bfs_enclosing,
)
from sesample.labeling import (
    assemble_node_input,
    label_cap_policy,
    read_bundle,
    write_bundle,
    zero_one_labels,
)

from conftest import er_graph


def oracle_labels(sample):
    """Independent isolated-BFS labeling oracle on adjacency dicts."""
    adj = {i: set() for i in range(sample.num_local_nodes)}
    for a, b in sample.local_adj.edge_array():
        adj[int(a)].add(int(b))
        adj[int(b)].add(int(a))

    def bfs_without(src, banned):
        dist = {src: 0}
        q = deque([src])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if y != banned and y not in dist:
                    dist[y] = dist[x] + 1
                    q.append(y)
        return dist

    du = bfs_without(sample.u_local, sample.v_local)
    dv = bfs_without(sample.v_local, sample.u_local)
    labels = []
    for x in range(sample.num_local_nodes):
        if x in (sample.u_local, sample.v_local):
            labels.append(1)
        elif x not in du or x not in dv:
            labels.append(0)
        else:
            labels.append(drnl_hash(du[x], dv[x]))
    return labels


# frozen from direct evaluation of the hash expression
DRNL_CASES = [((1, 1), 2), ((1, 2), 3), ((2, 1), 3), ((2, 2), 5), ((1, 3), 4), ((3, 1), 4)]


@pytest.mark.parametrize("dists,expected", DRNL_CASES)
def test_drnl_hash_values(dists, expected):
    assert drnl_hash(*dists) == expected


def test_drnl_hash_symmetric_small():
    for a in range(1, 21):
        for b in range(1, 21):
            assert drnl_hash(a, b) == drnl_hash(b, a)
            assert drnl_hash(a, b) >= 2


def test_drnl_hash_rejects_nonpositive():
    with pytest.raises(DataError):
        drnl_hash(0, 3)
    with pytest.raises(DataError):
        drnl_hash(2, -1)


def test_label_targets_forced_without_edge():
    g = build_graph([(0, 1)], 2)
    s = induced_subgraph(g, [0, 1], 0, 1)
    from sesample import strip_target_edge

    ls = label_subgraph(strip_target_edge(s))
    assert ls.labels.tolist() == [1, 1]


def test_label_middle_of_path():
    # u(0) - x(1) - v(2): x keeps distance 1 to each target in isolation
    g = build_graph([(0, 1), (1, 2)], 3)
    s = induced_subgraph(g, [0, 1, 2], 0, 2)
    ls = label_subgraph(s)
    assert ls.labels.tolist() == [1, 2, 1]


def test_label_node_behind_target_gets_zero():
    # u(0)-a(1)-v(2)-y(3): with v removed y is unreachable from u
    g = build_graph([(0, 1), (1, 2), (2, 3)], 4)
    s = induced_subgraph(g, [0, 1, 2, 3], 0, 2)
    ls = label_subgraph(s)
    assert ls.labels[3] == 0


def test_zero_one_scheme():
    g = build_graph([(0, 1), (1, 2)], 3)
    s = induced_subgraph(g, [0, 1, 2], 0, 2)
    ls = label_subgraph(s, scheme="zero-one")
    assert ls.labels.tolist() == [1, 0, 1]
    assert zero_one_labels(s).tolist() == [1, 0, 1]


@pytest.mark.parametrize("seed", range(12))
def test_labels_match_oracle_on_extracted_subgraphs(seed):
    g = er_graph(70, 0.07, 400 + seed)
    rng = np.random.default_rng(seed)
    u, v = map(int, rng.choice(70, size=2, replace=False))
    if seed % 2:
        sample = bfs_enclosing(g, u, v, h=int(rng.integers(1, 4)))
    else:
        cfg = ExtractionConfig("rw", h=3, k=5, seed=seed)
        sample = rw_enclosing(g, u, v, cfg, link_index=seed)
    ls = label_subgraph(sample)
    assert ls.labels.tolist() == oracle_labels(sample)


def test_target_labels_survive_stripping(triangle):
    from sesample import strip_target_edge

    s = strip_target_edge(induced_subgraph(triangle, [0, 1, 2], 0, 1))
    ls = label_subgraph(s)
    assert ls.labels[s.u_local] == 1 and ls.labels[s.v_local] == 1


def test_assemble_label_zero():
    g = build_graph([(0, 1)], 2)
    ls = label_subgraph(induced_subgraph(g, [0, 1], 0, 1))
    row = assemble_node_input(ls, g, label_cap=3)
    assert row.shape == (2, 4)
    onehot_zero = assemble_node_input(
        label_subgraph(induced_subgraph(build_graph([(0, 1), (1, 2), (2, 3)], 4), [0, 1, 2, 3], 0, 2)),
        build_graph([(0, 1), (1, 2), (2, 3)], 4),
        label_cap=3,
    )
    assert onehot_zero[3].tolist() == [1, 0, 0, 0]  # label 0 -> first bucket


def test_assemble_clamps_large_labels():
    g = build_graph([(0, 1)], 2)
    s = induced_subgraph(g, [0, 1], 0, 1)
    ls = label_subgraph(s)
    big = type(ls)(s, np.array([7, 1]))
    row = assemble_node_input(big, g, label_cap=3)
    assert row[0].tolist() == [0, 0, 0, 1]


def test_assemble_concatenates_features():
    g = build_graph([(0, 1), (1, 2)], 3, features=np.array([[0.5], [0.25], [0.125]]))
    s = induced_subgraph(g, [0, 1, 2], 0, 2)
    ls = label_subgraph(s)  # labels [1, 2, 1]
    rows = assemble_node_input(ls, g, label_cap=3)
    assert rows.shape == (3, 5)
    assert rows[1].tolist() == [0, 0, 1, 0, 0.25]


def test_assemble_rejects_bad_cap():
    g = build_graph([(0, 1)], 2)
    ls = label_subgraph(induced_subgraph(g, [0, 1], 0, 1))
    with pytest.raises(DataError):
        assemble_node_input(ls, g, label_cap=0)


def test_label_cap_policy_clamps():
    g = build_graph([(0, 1)], 2)
    s = induced_subgraph(g, [0, 1], 0, 1)
    small = type(label_subgraph(s))(s, np.array([1, 1]))
    assert label_cap_policy([small]) == 10
    huge = type(label_subgraph(s))(s, np.array([1, 512]))
    assert label_cap_policy([huge]) == 100
    mid = type(label_subgraph(s))(s, np.array([1, 37]))
    assert label_cap_policy([mid]) == 37


def test_bundle_roundtrip(tmp_path):
    g = er_graph(30, 0.15, 77)
    cfg = ExtractionConfig("rw", h=2, k=4, seed=5)
    rng = np.random.default_rng(0)
    labeled = []
    for i in range(10):
        u, v = map(int, rng.choice(30, size=2, replace=False))
        labeled.append(label_subgraph(rw_enclosing(g, u, v, cfg, link_index=i)))
    path = tmp_path / "x.bundle"
    write_bundle(labeled, path)
    back = read_bundle(path)
    assert len(back) == len(labeled)
    for a, b in zip(labeled, back):
        assert a.sample == b.sample
        assert a.labels.tolist() == b.labels.tolist()


def test_bundle_malformed(tmp_path):
    p = tmp_path / "bad.bundle"
    p.write_text("S 2 1 0 1\nN 0 1\n")
    with pytest.raises(DataError, match="truncated"):
        read_bundle(p)
    p.write_text("X 2 1 0 1\n")
    with pytest.raises(DataError, match="header"):
        read_bundle(p)
