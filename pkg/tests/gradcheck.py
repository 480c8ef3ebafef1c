"""Central finite-difference checks for the tape models (shared by the unit and acceptance suites)."""

import numpy as np

from plcbinx.learn import autodiff as ad, gnn, transformer
from plcbinx.learn.config import GnnConfig, SeqClassifierConfig
from plcbinx.learn.features import GraphSample, make_batch

STEP = 1e-5


def relative_errors(params, loss_fn, rng, per_tensor=6):
    """Worst relative error per parameter tensor over sampled entries.

    Half the entries are drawn where the analytic gradient is non-zero so that
    sparse tensors such as the embedding table are really exercised.
    """
    taped = {k: ad.param(v) for k, v in params.items()}
    loss_fn(taped).backward()
    frozen = lambda: {k: ad.const(v) for k, v in params.items()}  # noqa: E731
    worst = {}
    for name, value in params.items():
        grad = taped[name].grad if taped[name].grad is not None else np.zeros_like(value)
        live = np.flatnonzero(grad)
        picks = list(rng.choice(live, min(per_tensor // 2, len(live)), replace=False)) if len(live) else []
        picks += list(rng.choice(value.size, min(per_tensor - len(picks), value.size), replace=False))
        worst[name] = 0.0
        for flat in picks:
            ix = np.unravel_index(flat, value.shape)
            old = value[ix]
            value[ix] = old + STEP
            up = loss_fn(frozen()).value
            value[ix] = old - STEP
            down = loss_fn(frozen()).value
            value[ix] = old
            num, an = (up - down) / (2 * STEP), grad[ix]
            worst[name] = max(worst[name], abs(num - an) / max(abs(num) + abs(an), 1e-8))
    return worst


def _jitter_biases(params, rng):
    """Zero-initialised biases put dead ReLU units exactly on the kink; move them off it."""
    for k, v in params.items():
        if k.rsplit(".", 1)[-1].startswith("b"):
            params[k] = v + rng.normal(0, 0.1, v.shape)
    return params


def transformer_case(seed):
    rng = np.random.default_rng(seed)
    cfg = SeqClassifierConfig(vocab=50, embed_dim=8, heads=2, ffn_dim=12, max_len=10, seed=seed)
    idx = rng.integers(1, 50, (3, 10))
    idx[1, 6:] = 0
    y = np.array([0, 1, 2])
    params = _jitter_biases(transformer.init_params(cfg), rng)
    return params, lambda p: ad.cross_entropy(transformer.forward(p, idx, cfg), y), rng


def random_graph_sample(rng, dim, n_funcs=2):
    n = int(rng.integers(n_funcs, 7))
    owner = np.sort(rng.integers(0, n_funcs, n))
    owner[:n_funcs] = np.arange(n_funcs)
    owner.sort()
    return GraphSample(rng.normal(size=(n, dim)), rng.integers(0, n, (n + 1, 2)), owner, n_funcs)


def gnn_case(seed):
    rng = np.random.default_rng(seed)
    cfg = GnnConfig(bag_dim=6, hidden=5, head_hidden=4, classes=tuple("abc"), seed=seed)
    batch = make_batch([random_graph_sample(rng, cfg.node_in_dim) for _ in range(3)])
    y, w = np.array([0, 1, 2]), np.array([1.0, 2.0, 0.5])
    return _jitter_biases(gnn.init_params(cfg), rng), lambda p: ad.cross_entropy(gnn.forward(p, batch, cfg), y, w), rng
