"""Hierarchical ACFG model: GraphSAGE layers, per-function mean, per-binary attention and max pooling."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import GnnConfig
from .features import GraphBatch
from .transformer import _glorot


def init_params(cfg: GnnConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    p = {}
    dim = cfg.node_in_dim
    for l in range(cfg.sage_layers):
        p[f"sage{l}.w_self"] = _glorot(rng, dim, cfg.hidden)
        p[f"sage{l}.w_neigh"] = _glorot(rng, dim, cfg.hidden)
        p[f"sage{l}.b"] = np.zeros(cfg.hidden)
        dim = cfg.hidden
    p["att.w"] = _glorot(rng, cfg.hidden, cfg.hidden)
    p["att.v"] = _glorot(rng, cfg.hidden, 1)
    p["head.w1"], p["head.b1"] = _glorot(rng, 2 * cfg.hidden, cfg.head_hidden), np.zeros(cfg.head_hidden)
    p["head.w2"], p["head.b2"] = _glorot(rng, cfg.head_hidden, len(cfg.classes)), np.zeros(len(cfg.classes))
    return p


def _function_embeddings(params: dict[str, ad.Tensor], batch: GraphBatch, cfg: GnnConfig):
    h = ad.const(batch.x)
    for l in range(cfg.sage_layers):
        own = ad.matmul(h, params[f"sage{l}.w_self"])
        neigh = ad.spmm(batch.adj_mean, ad.matmul(h, params[f"sage{l}.w_neigh"]))
        h = ad.relu(ad.add(ad.add(own, neigh), params[f"sage{l}.b"]))
    hf = ad.spmm(batch.func_pool, h)
    scores = ad.matmul(ad.tanh(ad.matmul(hf, params["att.w"])), params["att.v"])
    return hf, ad.segment_softmax(scores, batch.binary_of_func, batch.n_binaries)


def forward(params: dict[str, ad.Tensor], batch: GraphBatch, cfg: GnnConfig) -> ad.Tensor:
    """Logits, one row per binary in the batch."""
    hf, alpha = _function_embeddings(params, batch, cfg)
    att = ad.spmm(batch.binary_sum, ad.mul(hf, alpha))
    mx = ad.segment_max(hf, batch.binary_of_func, batch.n_binaries)
    z = ad.concat([att, mx], axis=1)
    hidden = ad.relu(ad.add(ad.matmul(z, params["head.w1"]), params["head.b1"]))
    return ad.add(ad.matmul(hidden, params["head.w2"]), params["head.b2"])


def attention_weights(params: dict[str, np.ndarray], batch: GraphBatch, cfg: GnnConfig) -> np.ndarray:
    """Per-function pooling weights (for inspection and tests)."""
    _, alpha = _function_embeddings({k: ad.const(v) for k, v in params.items()}, batch, cfg)
    return alpha.value[:, 0]
