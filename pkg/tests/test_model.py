import math

import numpy as np
import pytest

from sesample import (
    DataError,
    ExtractionConfig,
    ModelConfig,
    build_graph,
    induced_subgraph,
    label_subgraph,
    predict,
    rw_enclosing,
    train,
)
from sesample.labeling import assemble_node_input
from sesample.model import (
    StaleCacheError,
    adam_step,
    backward,
    bce_with_logits,
    forward,
    init_params,
    load_params,
    normalize_adjacency,
    save_params,
    sortpool_k_policy,
)

from conftest import er_graph


def make_labeled(g, u, v, cfg, link_index=0, cap=5):
    ls = label_subgraph(rw_enclosing(g, u, v, cfg, link_index))
    return ls.with_node_input(assemble_node_input(ls, g, cap))


def random_instance(seed, n=8, p=0.5, feat_dim=2, cap=5):
    rng = np.random.default_rng(seed)
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if edges:
            break
    feats = rng.normal(size=(n, feat_dim)) if feat_dim else None
    g = build_graph(edges, n, features=feats)
    u, v = map(int, rng.choice(n, size=2, replace=False))
    cfg = ExtractionConfig("rw", h=2, k=2, seed=seed)
    return make_labeled(g, u, v, cfg, cap=cap), int(rng.integers(0, 2))


TINY = ModelConfig(layer_dims=(5, 4, 1), sortpool_k=3, mlp_hidden=6, dropout_p=0.0, seed=3)


def test_normalize_single_node():
    g = build_graph([(0, 1)], 3)
    s = induced_subgraph(g, [2, 1], 1, 2)  # includes isolated node 2
    single = induced_subgraph(g, [2, 0], 0, 2)
    a = normalize_adjacency(single)
    assert a.shape == (2, 2)
    assert a[1, 1] == 1.0  # isolated node: self-loop only


def test_normalize_two_nodes_one_edge():
    g = build_graph([(0, 1)], 2)
    s = induced_subgraph(g, [0, 1], 0, 1)
    assert np.allclose(normalize_adjacency(s), 0.5)


@pytest.mark.parametrize("seed", range(4))
def test_normalize_row_sum_identity(seed):
    g = er_graph(20, 0.25, 700 + seed)
    s = induced_subgraph(g, range(20), 0, 1)
    a = normalize_adjacency(s)
    degs = np.diff(s.local_adj.row_offsets) + 1.0
    lhs = a @ np.sqrt(degs)
    assert np.allclose(lhs, np.sqrt(degs) * (degs / degs))
    # equivalently D^{-1/2}(A+I)D^{-1/2} D^{1/2} 1 = D^{1/2} 1
    assert np.allclose(a @ np.sqrt(degs), np.sqrt(degs))


def test_forward_zero_weights_gives_bias():
    ls, _ = random_instance(1)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    for w in params.param_list():
        w[...] = 0.0
    params.b_out[0] = 0.375
    logit, _ = forward(ls, params, TINY)
    assert logit == pytest.approx(0.375)


def test_forward_single_node_pads():
    g = build_graph([(0, 1)], 4)
    s = induced_subgraph(g, [2, 3], 2, 3)  # two isolated targets, no edges
    ls = label_subgraph(s)
    ls = ls.with_node_input(assemble_node_input(ls, g, 5))
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    logit, cache = forward(ls, params, TINY)
    assert math.isfinite(logit)
    assert cache["sel"].shape[0] == 2  # padded up to sortpool_k=3


def test_forward_permutation_invariant_with_distinct_sort_values():
    # same topology under a relabeling of global ids; distinct features
    # force distinct sort-channel values
    rng = np.random.default_rng(5)
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]
    feats = rng.normal(size=(4, 3))
    g = build_graph(edges, 4, features=feats)
    perm = np.array([2, 0, 3, 1])  # new id of old node i
    edges_p = [(perm[a], perm[b]) for a, b in edges]
    feats_p = np.empty_like(feats)
    feats_p[perm] = feats
    gp = build_graph(edges_p, 4, features=feats_p)

    s = induced_subgraph(g, range(4), 0, 2)
    sp = induced_subgraph(gp, range(4), int(perm[0]), int(perm[2]))
    ls = label_subgraph(s)
    lsp = label_subgraph(sp)
    cap = 5
    ls = ls.with_node_input(assemble_node_input(ls, g, cap))
    lsp = lsp.with_node_input(assemble_node_input(lsp, gp, cap))
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    la, _ = forward(ls, params, TINY)
    lb, _ = forward(lsp, params, TINY)
    assert la == pytest.approx(lb, rel=1e-12)


def test_backward_bce_derivative_at_zero_logit():
    ls, _ = random_instance(2)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    for w in params.param_list():
        w[...] = 0.0
    logit, cache = forward(ls, params, TINY)
    assert logit == 0.0
    grads = backward(cache, params, label=1)
    assert grads[-1][0] == pytest.approx(-0.5)  # sigma(0) - 1


def test_backward_stale_cache():
    ls, _ = random_instance(3)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    _, cache = forward(ls, params, TINY)
    other = params.copy()
    with pytest.raises(StaleCacheError):
        backward(cache, other, 1)


def num_grad_check(ls, label, config, rel_tol):
    params = init_params(config, ls.node_input.shape[1], config.sortpool_k)
    _, cache = forward(ls, params, config)
    grads = backward(cache, params, label)

    def loss():
        logit, _ = forward(ls, params, config)
        return bce_with_logits(logit, label)

    h = 1e-5
    worst = 0.0
    for p, grad in zip(params.param_list(), grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lp = loss()
            p[idx] = orig - h
            lm = loss()
            p[idx] = orig
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), abs(grad[idx]), 1e-8)
            worst = max(worst, abs(fd - grad[idx]) / denom)
    assert worst < rel_tol, f"worst relative gradient error {worst}"


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    ls, label = random_instance(1000 + seed, n=6, p=0.6)
    num_grad_check(ls, label, TINY, rel_tol=1e-4)


def test_adam_first_step_magnitude():
    cfg = ModelConfig(layer_dims=(1,), sortpool_k=1, mlp_hidden=1, seed=0)
    params = init_params(cfg, 1, 1)
    before = params.b_out.copy()
    grads = [np.zeros_like(p) for p in params.param_list()]
    grads[-1] = np.array([1.0])
    adam_step(params, grads, lr=0.1)
    # bias correction makes mhat = g and vhat = g^2 at t=1
    assert params.b_out[0] == pytest.approx(before[0] - 0.1, abs=1e-6)


def test_adam_zero_gradients_freeze_params():
    ls, _ = random_instance(4)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    snapshot = [p.copy() for p in params.param_list()]
    zeros = [np.zeros_like(p) for p in params.param_list()]
    for _ in range(5):
        adam_step(params, zeros, lr=0.5)
    for a, b in zip(snapshot, params.param_list()):
        assert np.array_equal(a, b)


def test_adam_rejects_nonfinite():
    ls, _ = random_instance(5)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    grads = [np.zeros_like(p) for p in params.param_list()]
    grads[0][0, 0] = np.nan
    with pytest.raises(RuntimeError, match="non-finite"):
        adam_step(params, grads, lr=0.1)


def toy_dataset(n_each=12, cap=5):
    """Separable motifs: positives sit inside a dense clique, negatives
    bridge two sparse stars."""
    rng = np.random.default_rng(99)
    samples = []
    clique = build_graph([(i, j) for i in range(6) for j in range(i + 1, 6)], 6)
    stars = build_graph([(0, i) for i in range(2, 7)] + [(1, i) for i in range(7, 12)], 12)
    cfg = ExtractionConfig("rw", h=2, k=4, seed=1)
    for i in range(n_each):
        u, v = map(int, rng.choice(6, size=2, replace=False))
        samples.append((make_labeled(clique, u, v, cfg, link_index=i, cap=cap), 1))
        samples.append((make_labeled(stars, 0, 1, cfg, link_index=100 + i, cap=cap), 0))
    return samples


def test_train_lr_zero_keeps_initial_weights():
    data = toy_dataset(6)
    cfg = ModelConfig(layer_dims=(4, 1), sortpool_k=4, mlp_hidden=8,
                      dropout_p=0.0, lr=0.0, epochs=1, seed=7)
    input_dim = data[0][0].node_input.shape[1]
    init = init_params(cfg, input_dim, 4)
    best, history = train(data, data, cfg)
    for a, b in zip(init.param_list(), best.param_list()):
        assert np.array_equal(a, b)
    assert len(history) == 1


def test_train_loss_decreases_on_separable_toy():
    data = toy_dataset(12)
    cfg = ModelConfig(layer_dims=(8, 1), sortpool_k=4, mlp_hidden=16,
                      dropout_p=0.0, lr=0.01, epochs=5, batch_size=8, seed=2)
    _, history = train(data, data, cfg)
    losses = [row["train_loss"] for row in history]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_train_same_seed_identical_history():
    data = toy_dataset(5)
    cfg = ModelConfig(layer_dims=(4, 1), sortpool_k=3, mlp_hidden=8,
                      lr=0.01, epochs=3, seed=11)
    _, h1 = train(data, data, cfg)
    _, h2 = train(data, data, cfg)
    assert h1 == h2


def test_train_rejects_single_class():
    data = [(ls, 1) for ls, _ in toy_dataset(4)]
    cfg = ModelConfig(sortpool_k=3, epochs=1)
    with pytest.raises(DataError, match="both classes"):
        train(data, data, cfg)


def test_predict_bounds_and_midpoint():
    ls, _ = random_instance(6)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    for w in params.param_list():
        w[...] = 0.0
    assert predict(params, ls, TINY) == pytest.approx(0.5)
    params.b_out[0] = 20.0
    assert predict(params, ls, TINY) > 0.999999
    params.b_out[0] = 1e4
    p = predict(params, ls, TINY)
    assert 0.0 < p < 1.0


def test_untrained_loss_near_ln2():
    rng = np.random.default_rng(12)
    losses = []
    for i in range(200):
        ls, label = random_instance(2000 + i, n=7, p=0.5)
        cfg = TINY
        params = init_params(cfg, ls.node_input.shape[1], cfg.sortpool_k)
        logit, _ = forward(ls, params, cfg)
        losses.append(bce_with_logits(logit, int(rng.integers(0, 2))))
    assert abs(np.mean(losses) - math.log(2)) < 0.2


def test_training_stays_finite():
    data = toy_dataset(8)
    cfg = ModelConfig(layer_dims=(8, 1), sortpool_k=4, mlp_hidden=16,
                      dropout_p=0.5, lr=0.01, epochs=8, seed=13)
    best, history = train(data, data, cfg)
    for p in best.param_list():
        assert np.all(np.isfinite(p))
    assert all(math.isfinite(r["train_loss"]) and math.isfinite(r["val_auc"]) for r in history)


def test_sortpool_policy_quantile_and_clamp():
    class Fake:
        def __init__(self, n):
            self.num_local_nodes = n

    assert sortpool_k_policy([Fake(n) for n in [5, 5, 5]]) == 10  # clamp up
    assert sortpool_k_policy([Fake(n) for n in [500, 600]]) == 200  # clamp down
    assert sortpool_k_policy([Fake(n) for n in [10, 20, 30, 40, 50]]) == 30  # 0.6-quantile


def test_save_load_roundtrip(tmp_path):
    ls, _ = random_instance(7)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    grads = backward(forward(ls, params, TINY)[1], params, 1)
    adam_step(params, grads, lr=0.01)
    path = tmp_path / "m.ckpt"
    save_params(params, path)
    back = load_params(path, TINY, params.input_dim)
    for a, b in zip(params.param_list(), back.param_list()):
        assert np.array_equal(a, b)
    for a, b in zip(params.m + params.v, back.m + back.v):
        assert np.array_equal(a, b)
    assert back.step == params.step
    logit_a, _ = forward(ls, params, TINY)
    logit_b, _ = forward(ls, back, TINY)
    assert logit_a == logit_b


def test_load_truncated_file(tmp_path):
    ls, _ = random_instance(8)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    path = tmp_path / "m.ckpt"
    save_params(params, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(DataError, match="truncated"):
        load_params(path, TINY, params.input_dim)


def test_load_config_mismatch(tmp_path):
    ls, _ = random_instance(9)
    params = init_params(TINY, ls.node_input.shape[1], TINY.sortpool_k)
    path = tmp_path / "m.ckpt"
    save_params(params, path)
    other = ModelConfig(layer_dims=(6, 4, 1), sortpool_k=3, mlp_hidden=6, dropout_p=0.0)
    with pytest.raises(DataError, match="config-hash"):
        load_params(path, other, params.input_dim)


def test_forward_rejects_wrong_width():
    ls, _ = random_instance(10, cap=5)
    params = init_params(TINY, ls.node_input.shape[1] + 2, TINY.sortpool_k)
    with pytest.raises(DataError, match="width"):
        forward(ls, params, TINY)
