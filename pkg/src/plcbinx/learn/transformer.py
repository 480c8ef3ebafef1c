"""Stage-1 platform-family classifier: a small Transformer encoder over hashed tokens."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import SeqClassifierConfig
from .features import PAD


def positional_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(pos * rate)
    pe[:, 1::2] = np.cos(pos * rate)
    return pe


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, (fan_in, fan_out))


def init_params(cfg: SeqClassifierConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    d, f = cfg.embed_dim, cfg.ffn_dim
    p = {"embed": rng.normal(0, 0.1, (cfg.vocab, d))}
    for l in range(cfg.encoder_layers):
        for name in ("q", "k", "v", "o"):
            p[f"l{l}.w{name}"] = _glorot(rng, d, d)
        p[f"l{l}.bo"] = np.zeros(d)
        p[f"l{l}.ln1_g"], p[f"l{l}.ln1_b"] = np.ones(d), np.zeros(d)
        p[f"l{l}.ln2_g"], p[f"l{l}.ln2_b"] = np.ones(d), np.zeros(d)
        p[f"l{l}.w1"], p[f"l{l}.b1"] = _glorot(rng, d, f), np.zeros(f)
        p[f"l{l}.w2"], p[f"l{l}.b2"] = _glorot(rng, f, d), np.zeros(d)
    p["out_w"], p["out_b"] = _glorot(rng, d, len(cfg.classes)), np.zeros(len(cfg.classes))
    return p


def valid_mask(idx: np.ndarray) -> np.ndarray:
    """Non-pad positions; an all-pad row keeps its first position so pooling stays defined."""
    valid = idx != PAD
    valid[:, 0] |= ~valid.any(axis=1)
    return valid


def forward(params: dict[str, ad.Tensor], idx: np.ndarray, cfg: SeqClassifierConfig) -> ad.Tensor:
    """Logits for a (batch, length) array of token indices."""
    valid = valid_mask(idx)
    keep = max(1, int(valid.any(axis=0).nonzero()[0].max()) + 1)  # drop trailing all-pad columns
    idx, valid = idx[:, :keep], valid[:, :keep]
    B, L = idx.shape
    d, H = cfg.embed_dim, cfg.heads
    dh = d // H
    x = ad.add(ad.gather_rows(params["embed"], idx), positional_encoding(L, d))
    key_mask = valid[:, None, None, :]
    for l in range(cfg.encoder_layers):
        P = lambda n: params[f"l{l}.{n}"]  # noqa: E731
        h = ad.layer_norm(x, P("ln1_g"), P("ln1_b"))

        def heads(w):
            return ad.transpose(ad.reshape(ad.matmul(h, w), (B, L, H, dh)), (0, 2, 1, 3))
        q, k, v = ad.scale(heads(P("wq")), 1.0 / np.sqrt(dh)), heads(P("wk")), heads(P("wv"))
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2)))
        att = ad.softmax(scores, axis=-1, mask=key_mask)
        o = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (B, L, d))
        x = ad.add(x, ad.add(ad.matmul(o, P("wo")), P("bo")))
        h2 = ad.layer_norm(x, P("ln2_g"), P("ln2_b"))
        ff = ad.add(ad.matmul(ad.relu(ad.add(ad.matmul(h2, P("w1")), P("b1"))), P("w2")), P("b2"))
        x = ad.add(x, ff)
    w = (valid / valid.sum(axis=1, keepdims=True))[:, :, None]
    pooled = ad.weighted_sum(x, w, axis=1)
    return ad.add(ad.matmul(pooled, params["out_w"]), params["out_b"])
