"""Stage-2 OpenPLC version classifier: logistic regression on fingerprint features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..represent import Fingerprint
from .config import Stage2Config
from .features import stage2_features

VERSIONS = ("OpenPLCv2", "OpenPLCv3")


class SingleClassTraining(ValueError):
    pass


@dataclass
class LogisticModel:
    """P(second class) = sigmoid(w·x + b). The bias is fixed at the training prior log-odds."""

    classes: tuple[str, str]
    weights: np.ndarray
    bias: float
    vocab: int

    def decision(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def predict_features(self, x: np.ndarray) -> list[str]:
        return [self.classes[int(s > 0)] for s in np.atleast_1d(self.decision(x))]

    def predict(self, fp: Fingerprint) -> str:
        return self.predict_features(stage2_features(fp, self.vocab))[0]


def train_stage2(features: np.ndarray, labels: list[str], cfg: Stage2Config = Stage2Config(),
                 classes: tuple[str, str] = VERSIONS) -> LogisticModel:
    """Full-batch gradient descent on mean log-loss plus L2."""
    y = np.array([classes.index(l) for l in labels], dtype=float)
    if len(set(y)) < 2:
        raise SingleClassTraining(f"stage-2 training needs both {classes}")
    prior = y.mean()
    bias = float(np.log(prior / (1 - prior)))
    w = np.zeros(features.shape[1])
    for _ in range(cfg.steps):
        p = 1.0 / (1.0 + np.exp(-(features @ w + bias)))
        w -= cfg.lr * (features.T @ (p - y) / len(y) + cfg.l2 * w)
    return LogisticModel(tuple(classes), w, bias, cfg.vocab)
