"""Adam and a mini-batch training loop with program-level validation for model selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..hashing import fnv1a64
from ..metrics import weighted_f1
from . import autodiff as ad
from .config import TrainConfig

log = logging.getLogger(__name__)


class EmptyTrainingFold(ValueError):
    pass


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        for k in sorted(params):
            g = grads.get(k)
            if g is None:
                continue
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mhat = self.m[k] / (1 - c.beta1 ** self.t)
            vhat = self.v[k] / (1 - c.beta2 ** self.t)
            params[k] -= c.lr * mhat / (np.sqrt(vhat) + c.eps)


def class_weights(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Inverse-frequency weights over the classes present; absent classes get 0."""
    counts = np.bincount(y, minlength=n_classes).astype(float)
    present = counts > 0
    w = np.zeros(n_classes)
    w[present] = len(y) / (present.sum() * counts[present])
    return w


def validation_split(program_ids: Sequence[str], fraction: float, seed: int) -> np.ndarray:
    """Boolean mask selecting a deterministic ``fraction`` of programs (never all of them)."""
    programs = sorted(set(program_ids), key=lambda p: (fnv1a64(f"val:{seed}:{p}"), p))
    k = int(round(fraction * len(programs)))
    k = min(k, len(programs) - 1)
    chosen = set(programs[:max(k, 0)])
    return np.array([p in chosen for p in program_ids], dtype=bool)


def masked_argmax(logits: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    return np.where(allowed[None, :], logits, -np.inf).argmax(axis=1)


@dataclass
class FitResult:
    params: dict[str, np.ndarray]
    seen: np.ndarray  # classes present in the training labels
    best_epoch: int
    history: list[dict] = field(default_factory=list)


def fit(params: dict[str, np.ndarray], n_classes: int, labels: np.ndarray, program_ids: Sequence[str],
        forward: Callable[[dict[str, ad.Tensor], np.ndarray], ad.Tensor],
        cfg: TrainConfig) -> FitResult:
    """Train on all samples except a program-level validation slice.

    ``forward(params, indices)`` returns logits for the given sample indices. The
    snapshot kept is the latest epoch reaching the best validation weighted F1.
    Inputs are expected in a canonical order (sorted by binary id); shuffling is
    seeded from ``cfg.seed``.
    """
    if len(labels) == 0:
        raise EmptyTrainingFold("no training samples")
    labels = np.asarray(labels)
    val = validation_split(program_ids, cfg.val_fraction, cfg.seed) if cfg.val_fraction > 0 else \
        np.zeros(len(labels), dtype=bool)
    train_idx, val_idx = np.flatnonzero(~val), np.flatnonzero(val)
    seen = np.bincount(labels, minlength=n_classes) > 0
    weights = class_weights(labels[train_idx], n_classes) if cfg.class_weights else None
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params, cfg)
    best, best_score, stale, history = None, -1.0, 0, []

    def predict(idx):
        return masked_argmax(predict_logits(params, forward, idx, cfg.batch), seen)

    best_epoch = cfg.epochs
    for epoch in range(1, cfg.epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        total = 0.0
        for s in range(0, len(order), cfg.batch):
            batch = order[s:s + cfg.batch]
            tp = {k: ad.param(v) for k, v in params.items()}
            loss = ad.cross_entropy(forward(tp, batch), labels[batch], weights)
            loss.backward()
            opt.step(params, {k: t.grad for k, t in tp.items()})
            total += loss.value * len(batch)
        row = {"epoch": epoch, "loss": total / len(order)}
        if len(val_idx):
            row["val_f1"] = weighted_f1(predict(val_idx), labels[val_idx])
            # ties move the snapshot to the later epoch but do not reset patience
            stale = 0 if row["val_f1"] > best_score else stale + 1
            if row["val_f1"] >= best_score:
                best_score, best, best_epoch = row["val_f1"], {k: v.copy() for k, v in params.items()}, epoch
        history.append(row)
        log.debug("epoch %d %s", epoch, row)
        if cfg.patience is not None and len(val_idx) and stale >= cfg.patience:
            break
    return FitResult(best if best is not None else params, seen, best_epoch, history)


def predict_logits(params: dict[str, np.ndarray], forward, indices: np.ndarray, batch: int) -> np.ndarray:
    tp = {k: ad.const(v) for k, v in params.items()}
    return np.vstack([forward(tp, indices[s:s + batch]).value for s in range(0, len(indices), batch)])
