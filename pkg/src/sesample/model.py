"""Subgraph classifier: stacked graph convolutions, sort-based pooling,
MLP head; trained with Adam on binary cross-entropy.

The network is self-contained numpy with hand-derived gradients (the
test suite checks every parameter against central finite differences).
Propagation uses symmetric normalization with self-loops; the readout
sorts nodes by the final one-channel layer, keeps a fixed number of
rows, flattens, and feeds one hidden rectifier layer.  All math is
64-bit; forward passes are pure, training mutates optimizer state
sequentially.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import DataError, SubgraphSample
from .labeling import LabeledSubgraph
from .rng import derive_seed

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

CKPT_MAGIC = b"SESAMPLECKPT1\n"


class StaleCacheError(RuntimeError):
    """backward() called with a cache produced for different parameters."""


@dataclass(frozen=True)
class ModelConfig:
    layer_dims: tuple[int, ...] = (32, 32, 32, 1)
    sortpool_k: int | None = None  # None: resolved from training data
    mlp_hidden: int = 128
    dropout_p: float = 0.5
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.layer_dims or self.layer_dims[-1] != 1:
            raise DataError("layer_dims must end with the 1-channel sort layer")
        if any(d < 1 for d in self.layer_dims):
            raise DataError("layer_dims must be positive")
        if self.sortpool_k is not None and self.sortpool_k < 1:
            raise DataError("sortpool_k must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise DataError("dropout_p must be in [0, 1)")
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 1:
            raise DataError("lr must be >= 0; batch_size and epochs must be positive")


@dataclass
class ModelParams:
    """Trainable weights plus Adam state.

    Parameter declaration order (checkpoints, gradients, Adam) is:
    conv weights in layer order, mlp hidden weight, hidden bias, output
    weight, output bias.
    """

    conv_ws: list[np.ndarray]
    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0
    config_key: str = ""
    sortpool_k: int = 0
    input_dim: int = 0

    def param_list(self) -> list[np.ndarray]:
        return [*self.conv_ws, self.w_hidden, self.b_hidden, self.w_out, self.b_out]

    def set_param_list(self, arrays: list[np.ndarray]) -> None:
        L = len(self.conv_ws)
        self.conv_ws = arrays[:L]
        self.w_hidden, self.b_hidden, self.w_out, self.b_out = arrays[L:]

    def copy(self) -> "ModelParams":
        return ModelParams(
            [w.copy() for w in self.conv_ws],
            self.w_hidden.copy(),
            self.b_hidden.copy(),
            self.w_out.copy(),
            self.b_out.copy(),
            [a.copy() for a in self.m],
            [a.copy() for a in self.v],
            self.step,
            self.config_key,
            self.sortpool_k,
            self.input_dim,
        )

    def num_parameters(self) -> int:
        return sum(p.size for p in self.param_list())


def config_key(config: ModelConfig, sortpool_k: int, input_dim: int) -> str:
    blob = json.dumps(
        {
            "layer_dims": list(config.layer_dims),
            "sortpool_k": sortpool_k,
            "mlp_hidden": config.mlp_hidden,
            "input_dim": input_dim,
        },
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()


def sortpool_k_policy(samples, lo: int = 10, hi: int = 200) -> int:
    """0.6-quantile of training-subgraph node counts, clamped to [lo, hi]."""
    counts = sorted(
        s.sample.num_local_nodes if isinstance(s, LabeledSubgraph) else s.num_local_nodes
        for s in samples
    )
    if not counts:
        raise DataError("sortpool_k policy needs at least one sample")
    q = counts[int(np.ceil(0.6 * len(counts))) - 1]
    return int(min(max(q, lo), hi))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: ModelConfig, input_dim: int, sortpool_k: int) -> ModelParams:
    """Seeded Glorot-uniform weights, zero biases, fresh Adam state."""
    rng = np.random.default_rng(derive_seed(config.seed, "init"))
    dims = [input_dim, *config.layer_dims]
    conv_ws = [_glorot(rng, dims[i], dims[i + 1]) for i in range(len(config.layer_dims))]
    concat_dim = sum(config.layer_dims)
    w_hidden = _glorot(rng, sortpool_k * concat_dim, config.mlp_hidden)
    b_hidden = np.zeros(config.mlp_hidden)
    w_out = _glorot(rng, config.mlp_hidden, 1)[:, 0]
    b_out = np.zeros(1)
    params = ModelParams(
        conv_ws,
        w_hidden,
        b_hidden,
        w_out,
        b_out,
        config_key=config_key(config, sortpool_k, input_dim),
        sortpool_k=sortpool_k,
        input_dim=input_dim,
    )
    params.m = [np.zeros_like(p) for p in params.param_list()]
    params.v = [np.zeros_like(p) for p in params.param_list()]
    return params


def normalize_adjacency(s: SubgraphSample) -> np.ndarray:
    """Dense D^{-1/2} (A + I) D^{-1/2} over the local adjacency."""
    n = s.num_local_nodes
    a = np.zeros((n, n), dtype=np.float64)
    local = s.local_adj
    for v in range(n):
        a[v, local.neighbors(v)] = 1.0
    a[np.arange(n), np.arange(n)] = 1.0
    dinv = 1.0 / np.sqrt(a.sum(axis=1))
    return a * dinv[:, None] * dinv[None, :]


def _forward_core(anorm, x0, params: ModelParams, config: ModelConfig, mask, dropout_p):
    zs = [x0]
    azs = []
    for w in params.conv_ws:
        az = anorm @ zs[-1]
        azs.append(az)
        zs.append(np.tanh(az @ w))
    concat = np.hstack(zs[1:])
    n, width = concat.shape
    k = params.sortpool_k
    order = np.argsort(-concat[:, -1], kind="stable")
    sel = order[: min(n, k)]
    pooled = np.zeros((k, width), dtype=np.float64)
    pooled[: sel.shape[0]] = concat[sel]
    flat = pooled.reshape(-1)
    if mask is not None:
        flat_d = flat * mask / (1.0 - dropout_p)
    else:
        flat_d = flat
    h_pre = flat_d @ params.w_hidden + params.b_hidden
    h_act = np.maximum(h_pre, 0.0)
    logit = float(h_act @ params.w_out + params.b_out[0])
    cache = {
        "params_id": id(params),
        "anorm": anorm,
        "zs": zs,
        "azs": azs,
        "sel": sel,
        "width": width,
        "mask": mask,
        "dropout_p": dropout_p,
        "flat": flat,
        "flat_d": flat_d,
        "h_pre": h_pre,
        "h_act": h_act,
        "logit": logit,
    }
    return logit, cache


def forward(
    ls: LabeledSubgraph,
    params: ModelParams,
    config: ModelConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
):
    """Scalar logit for one labeled subgraph, plus the backward cache."""
    if ls.node_input is None:
        raise DataError("labeled subgraph has no assembled node_input")
    if ls.node_input.shape[1] != params.input_dim:
        raise DataError(
            f"node_input width {ls.node_input.shape[1]} != model input dim {params.input_dim}"
        )
    anorm = normalize_adjacency(ls.sample)
    mask = None
    if train_mode and config.dropout_p > 0.0:
        if rng is None:
            raise DataError("train-mode forward needs an rng for dropout")
        size = params.sortpool_k * sum(config.layer_dims)
        mask = (rng.random(size) >= config.dropout_p).astype(np.float64)
    return _forward_core(anorm, ls.node_input, params, config, mask, config.dropout_p)


def bce_with_logits(logit: float, label: int) -> float:
    return float(max(logit, 0.0) - logit * label + np.log1p(np.exp(-abs(logit))))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def backward(cache: dict, params: ModelParams, label: int) -> list[np.ndarray]:
    """Gradients of BCE-with-logits w.r.t. every parameter (declaration order).

    The sort selection is treated as constant; gradients flow only into
    the selected rows, padded rows contribute nothing.
    """
    if cache["params_id"] != id(params):
        raise StaleCacheError("cache was produced by a different ModelParams object")
    dlogit = _sigmoid(cache["logit"]) - float(label)
    h_act = cache["h_act"]
    dw_out = h_act * dlogit
    db_out = np.array([dlogit])
    dh_pre = (params.w_out * dlogit) * (cache["h_pre"] > 0.0)
    dw_hidden = np.outer(cache["flat_d"], dh_pre)
    db_hidden = dh_pre
    dflat = params.w_hidden @ dh_pre
    if cache["mask"] is not None:
        dflat = dflat * cache["mask"] / (1.0 - cache["dropout_p"])
    k = params.sortpool_k
    dpooled = dflat.reshape(k, cache["width"])
    sel = cache["sel"]
    n = cache["zs"][0].shape[0]
    dconcat = np.zeros((n, cache["width"]), dtype=np.float64)
    dconcat[sel] = dpooled[: sel.shape[0]]

    dims = [w.shape[1] for w in params.conv_ws]
    bounds = np.cumsum([0, *dims])
    zs, azs, anorm = cache["zs"], cache["azs"], cache["anorm"]
    conv_grads: list[np.ndarray] = [None] * len(params.conv_ws)
    grad_z = dconcat[:, bounds[-2] : bounds[-1]]
    for l in range(len(params.conv_ws) - 1, -1, -1):
        dpre = grad_z * (1.0 - zs[l + 1] ** 2)
        conv_grads[l] = azs[l].T @ dpre
        if l > 0:
            grad_z = anorm @ (dpre @ params.conv_ws[l].T) + dconcat[:, bounds[l - 1] : bounds[l]]
    return [*conv_grads, dw_hidden, db_hidden, dw_out, db_out]


def adam_step(
    params: ModelParams,
    grads: list[np.ndarray],
    lr: float,
    betas: tuple[float, float] = ADAM_BETAS,
    eps: float = ADAM_EPS,
) -> ModelParams:
    """Bias-corrected Adam update, in place; returns params for chaining."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise RuntimeError("non-finite gradient; aborting training")
    b1, b2 = betas
    params.step += 1
    t = params.step
    arrays = params.param_list()
    for i, (p, g) in enumerate(zip(arrays, grads)):
        params.m[i] = b1 * params.m[i] + (1.0 - b1) * g
        params.v[i] = b2 * params.v[i] + (1.0 - b2) * g * g
        mhat = params.m[i] / (1.0 - b1**t)
        vhat = params.v[i] / (1.0 - b2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    return params


def predict(params: ModelParams, ls: LabeledSubgraph, config: ModelConfig) -> float:
    """Link probability, dropout disabled; strictly inside (0, 1)."""
    logit, _ = forward(ls, params, config, train_mode=False)
    return float(np.clip(_sigmoid(logit), 1e-12, 1.0 - 1e-12))


def _conv_pool_forward(anorm, x0, params: ModelParams):
    """Graph-conv stack and sort pooling; returns the flattened readout
    and the cache needed to push gradients back through it."""
    zs = [x0]
    azs = []
    for w in params.conv_ws:
        az = anorm @ zs[-1]
        azs.append(az)
        zs.append(np.tanh(az @ w))
    concat = np.hstack(zs[1:])
    n, width = concat.shape
    k = params.sortpool_k
    order = np.argsort(-concat[:, -1], kind="stable")
    sel = order[: min(n, k)]
    pooled = np.zeros((k, width), dtype=np.float64)
    pooled[: sel.shape[0]] = concat[sel]
    return pooled.reshape(-1), (anorm, zs, azs, sel, width)


def _conv_pool_backward(conv_cache, params: ModelParams, dflat, out_grads) -> None:
    """Accumulate conv-weight gradients for one sample into out_grads."""
    anorm, zs, azs, sel, width = conv_cache
    dpooled = dflat.reshape(params.sortpool_k, width)
    dconcat = np.zeros((zs[0].shape[0], width), dtype=np.float64)
    dconcat[sel] = dpooled[: sel.shape[0]]
    dims = [w.shape[1] for w in params.conv_ws]
    bounds = np.cumsum([0, *dims])
    grad_z = dconcat[:, bounds[-2] : bounds[-1]]
    for l in range(len(params.conv_ws) - 1, -1, -1):
        dpre = grad_z * (1.0 - zs[l + 1] ** 2)
        out_grads[l] += azs[l].T @ dpre
        if l > 0:
            grad_z = anorm @ (dpre @ params.conv_ws[l].T) + dconcat[:, bounds[l - 1] : bounds[l]]


def _head_logits(flat_mat: np.ndarray, params: ModelParams):
    """MLP head over a stack of readout vectors (one GEMM per batch)."""
    h_pre = flat_mat @ params.w_hidden + params.b_hidden
    h_act = np.maximum(h_pre, 0.0)
    logits = h_act @ params.w_out + params.b_out[0]
    return logits, h_pre, h_act


def _val_auc(val_prepped, params, config) -> float:
    from .evaluate import auc

    flats = np.stack(
        [_conv_pool_forward(anorm, x0, params)[0] for anorm, x0, _ in val_prepped]
    )
    labels = np.array([label for _, _, label in val_prepped])
    logits, _, _ = _head_logits(flats, params)
    probs = 1.0 / (1.0 + np.exp(-np.clip(logits, -700.0, 700.0)))
    return auc(probs[labels == 1], probs[labels == 0])


def train(train_samples, val_samples, config: ModelConfig):
    """Mini-batch training; returns (best-validation-AUC params, history).

    train_samples / val_samples are sequences of (LabeledSubgraph, label)
    with node_input assembled.  History rows record per-epoch mean
    training loss and validation AUC.
    """
    if not train_samples:
        raise DataError("empty training set")
    labels = {label for _, label in train_samples}
    if labels != {0, 1}:
        raise DataError(f"training set must contain both classes, got labels {sorted(labels)}")
    if not val_samples or {label for _, label in val_samples} != {0, 1}:
        raise DataError("validation set must contain both classes")
    input_dim = train_samples[0][0].node_input.shape[1]
    k = config.sortpool_k if config.sortpool_k is not None else sortpool_k_policy(
        [ls for ls, _ in train_samples]
    )
    cfg = replace(config, sortpool_k=k)
    params = init_params(cfg, input_dim, k)

    # adjacency and inputs are constant across epochs; prepare once
    def prep(pairs):
        out = []
        for ls, label in pairs:
            if ls.node_input is None:
                raise DataError("labeled subgraph has no assembled node_input")
            if ls.node_input.shape[1] != input_dim:
                raise DataError("inconsistent node_input widths in training data")
            out.append((normalize_adjacency(ls.sample), ls.node_input, int(label)))
        return out

    tr = prep(train_samples)
    va = prep(val_samples)

    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, "shuffle"))
    dropout_rng = np.random.default_rng(derive_seed(cfg.seed, "dropout"))
    mask_size = k * sum(cfg.layer_dims)

    best = params.copy()
    best_auc = -1.0
    history: list[dict] = []
    keep_p = 1.0 - cfg.dropout_p
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(tr))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            b = batch.shape[0]
            conv_caches = []
            flats = np.empty((b, mask_size), dtype=np.float64)
            labels = np.empty(b, dtype=np.float64)
            for j, idx in enumerate(batch):
                anorm, x0, label = tr[idx]
                flats[j], cache = _conv_pool_forward(anorm, x0, params)
                conv_caches.append(cache)
                labels[j] = label
            if cfg.dropout_p > 0.0:
                masks = (dropout_rng.random((b, mask_size)) >= cfg.dropout_p).astype(np.float64)
                flats_d = flats * masks / keep_p
            else:
                masks = None
                flats_d = flats
            # one GEMM per batch through the MLP head (the weight matrix
            # is large; touching it per sample dominates runtime)
            logits, h_pre, h_act = _head_logits(flats_d, params)
            z = np.clip(logits, -700.0, 700.0)
            epoch_loss += float(
                np.sum(np.maximum(logits, 0.0) - logits * labels + np.log1p(np.exp(-np.abs(z))))
            )
            dlogits = 1.0 / (1.0 + np.exp(-z)) - labels
            dw_out = h_act.T @ dlogits
            db_out = np.array([dlogits.sum()])
            dh_pre = np.outer(dlogits, params.w_out) * (h_pre > 0.0)
            dw_hidden = flats_d.T @ dh_pre
            db_hidden = dh_pre.sum(axis=0)
            dflats = dh_pre @ params.w_hidden.T
            if masks is not None:
                dflats = dflats * masks / keep_p
            conv_grads = [np.zeros_like(w) for w in params.conv_ws]
            for j in range(b):
                _conv_pool_backward(conv_caches[j], params, dflats[j], conv_grads)
            inv = 1.0 / b
            grads = [g * inv for g in conv_grads] + [
                dw_hidden * inv,
                db_hidden * inv,
                dw_out * inv,
                db_out * inv,
            ]
            adam_step(params, grads, cfg.lr)
        val_auc = _val_auc(va, params, cfg)
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss / len(tr), "val_auc": val_auc}
        )
        if val_auc > best_auc:
            best_auc = val_auc
            best = params.copy()
    return best, history


def save_params(params: ModelParams, path) -> None:
    """Binary checkpoint: magic, config hash, length-prefixed f64 arrays
    (weights, then Adam moments, then the step counter)."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(params.config_key.encode("ascii"))
        fh.write(b"\n")
        for arr in [*params.param_list(), *params.m, *params.v]:
            flat = np.ascontiguousarray(arr, dtype="<f8").reshape(-1)
            fh.write(struct.pack("<Q", flat.size))
            fh.write(flat.tobytes())
        fh.write(struct.pack("<Q", params.step))


def load_params(path, config: ModelConfig, input_dim: int) -> ModelParams:
    """Load a checkpoint, verifying it matches (config, input_dim)."""
    if config.sortpool_k is None:
        raise DataError("loading a checkpoint requires a resolved sortpool_k")
    expected = config_key(config, config.sortpool_k, input_dim)
    with open(path, "rb") as fh:
        magic = fh.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise DataError(f"{path}: not a sesample checkpoint")
        key = fh.read(65).rstrip(b"\n").decode("ascii", errors="replace")
        if len(key) != 64:
            raise DataError(f"{path}: truncated config hash")
        if key != expected:
            raise DataError(
                f"{path}: config-hash mismatch (checkpoint {key[:12]}..., "
                f"requested {expected[:12]}...)"
            )
        template = init_params(config, input_dim, config.sortpool_k)
        arrays = []
        for ref in [*template.param_list(), *template.m, *template.v]:
            raw = fh.read(8)
            if len(raw) != 8:
                raise DataError(f"{path}: truncated checkpoint (array header)")
            (count,) = struct.unpack("<Q", raw)
            if count != ref.size:
                raise DataError(
                    f"{path}: array length {count} does not match expected {ref.size}"
                )
            data = fh.read(8 * count)
            if len(data) != 8 * count:
                raise DataError(f"{path}: truncated checkpoint (array data)")
            arrays.append(np.frombuffer(data, dtype="<f8").reshape(ref.shape).copy())
        raw = fh.read(8)
        if len(raw) != 8:
            raise DataError(f"{path}: truncated checkpoint (step counter)")
        (step,) = struct.unpack("<Q", raw)
    L = len(template.conv_ws)
    n_params = L + 4
    weights = arrays[:n_params]
    return ModelParams(
        weights[:L],
        weights[L],
        weights[L + 1],
        weights[L + 2],
        weights[L + 3],
        m=arrays[n_params : 2 * n_params],
        v=arrays[2 * n_params :],
        step=int(step),
        config_key=key,
        sortpool_k=config.sortpool_k,
        input_dim=input_dim,
    )


__all__ = [
    "ModelConfig",
    "ModelParams",
    "StaleCacheError",
    "config_key",
    "sortpool_k_policy",
    "init_params",
    "normalize_adjacency",
    "forward",
    "backward",
    "bce_with_logits",
    "adam_step",
    "train",
    "predict",
    "save_params",
    "load_params",
]
