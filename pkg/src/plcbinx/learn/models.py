"""Trainable toolchain and functionality models, their predictions and JSON persistence."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..forge.labels import LABELS
from ..funcrec import FAMILIES, PLATFORMS, FunctionProgramRecord, family_of
from ..represent import build_fingerprint
from . import gnn, transformer
from .config import GnnConfig, Hyperparams, SeqClassifierConfig, Stage2Config, TrainConfig
from .features import (GraphSample, NoFunctionsSelected, graph_sample, make_batch, stage1_features,
                       stage2_features)
from .stage2 import VERSIONS, LogisticModel, train_stage2
from .train import FitResult, fit, masked_argmax, predict_logits

log = logging.getLogger(__name__)

MODEL_FORMAT = "plcbinx-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _ordered(records: list[FunctionProgramRecord]) -> list[FunctionProgramRecord]:
    return sorted(records, key=lambda r: r.binary_id)


# stage 1 ------------------------------------------------------------------

def fit_stage1(X: np.ndarray, families: list[str], program_ids: list[str], cfg: SeqClassifierConfig,
               tcfg: TrainConfig) -> FitResult:
    y = np.array([cfg.classes.index(f) for f in families])
    X = X[:, :cfg.max_len]
    return fit(transformer.init_params(cfg), len(cfg.classes), y, program_ids,
               lambda p, idx: transformer.forward(p, X[idx], cfg), tcfg)


def predict_stage1(params: dict[str, np.ndarray], seen: np.ndarray, X: np.ndarray, cfg: SeqClassifierConfig,
                   batch: int = 8) -> list[str]:
    X = X[:, :cfg.max_len]
    logits = predict_logits(params, lambda p, idx: transformer.forward(p, X[idx], cfg), np.arange(len(X)), batch)
    return [cfg.classes[i] for i in masked_argmax(logits, seen)]


@dataclass
class ToolchainModel:
    stage1_cfg: SeqClassifierConfig
    stage1_params: dict[str, np.ndarray]
    stage1_seen: np.ndarray
    stage2: LogisticModel | None
    openplc_versions: tuple[str, ...]
    functions: str = "runtime"
    batch: int = 8

    def features(self, record: FunctionProgramRecord) -> np.ndarray:
        c = self.stage1_cfg
        return stage1_features(record, c.vocab, c.max_len, self.functions)

    def predict_families(self, X: np.ndarray) -> list[str]:
        return predict_stage1(self.stage1_params, self.stage1_seen, X, self.stage1_cfg, self.batch)

    def resolve_version(self, family: str, stage2_x: np.ndarray | None) -> str:
        """Platform label for a predicted family; stage 2 only runs for OpenPLC."""
        if family != "OpenPLC":
            return {"CODESYS": "CODESYSv3", "GEB": "GEB"}[family]
        if self.stage2 is None:
            return self.openplc_versions[0]
        return self.stage2.predict_features(stage2_x)[0]

    def predict_records(self, records: list[FunctionProgramRecord]) -> list[tuple[str, str]]:
        """(family, platform) per record."""
        if not records:
            return []
        fams = self.predict_families(np.stack([self.features(r) for r in records]))
        out = []
        for r, fam in zip(records, fams):
            x = stage2_features(build_fingerprint(r), self.stage2.vocab) if fam == "OpenPLC" and self.stage2 else None
            out.append((fam, self.resolve_version(fam, x)))
        return out


def train_toolchain(records: list[FunctionProgramRecord], hp: Hyperparams = Hyperparams(),
                    functions: str = "runtime") -> ToolchainModel:
    """Records must carry platform labels and categories."""
    records = _ordered(records)
    cfg = hp.stage1
    X = np.stack([stage1_features(r, cfg.vocab, cfg.max_len, functions) for r in records])
    res = fit_stage1(X, [family_of(r.platform_label) for r in records], [r.program_id for r in records],
                     cfg, hp.stage1_train)
    openplc = [r for r in records if family_of(r.platform_label) == "OpenPLC"]
    return ToolchainModel(cfg, res.params, res.seen, *fit_stage2(openplc, hp.stage2), functions=functions,
                          batch=hp.stage1_train.batch)


def fit_stage2(openplc: list[FunctionProgramRecord], cfg: Stage2Config,
               features: np.ndarray | None = None) -> tuple[LogisticModel | None, tuple[str, ...]]:
    versions = tuple(sorted({r.platform_label for r in openplc}))
    if len(versions) < 2:
        log.warning("stage 2 needs both OpenPLC versions; got %s", versions or "none")
        return None, versions or (VERSIONS[0],)
    if features is None:
        features = np.stack([stage2_features(build_fingerprint(r), cfg.vocab) for r in openplc])
    return train_stage2(features, [r.platform_label for r in openplc], cfg), versions


# functionality --------------------------------------------------------------

def fit_gnn(samples: list[GraphSample], labels: list[str], program_ids: list[str], cfg: GnnConfig,
            tcfg: TrainConfig) -> FitResult:
    y = np.array([cfg.classes.index(l) for l in labels])
    return fit(gnn.init_params(cfg), len(cfg.classes), y, program_ids,
               lambda p, idx: gnn.forward(p, make_batch([samples[i] for i in idx]), cfg), tcfg)


@dataclass
class FunctionalityModel:
    cfg: GnnConfig
    params: dict[str, np.ndarray]
    seen: np.ndarray
    functions: str = "core"
    batch: int = 8

    def sample(self, record: FunctionProgramRecord) -> GraphSample:
        return graph_sample(record, self.functions, self.cfg.bag_dim)

    def predict_samples(self, samples: list[GraphSample]) -> list[str]:
        logits = predict_logits(self.params, lambda p, idx: gnn.forward(p, make_batch([samples[i] for i in idx]),
                                                                        self.cfg),
                                np.arange(len(samples)), self.batch)
        return [self.cfg.classes[i] for i in masked_argmax(logits, self.seen)]

    def predict_records(self, records: list[FunctionProgramRecord]) -> list[str]:
        return self.predict_samples([self.sample(r) for r in records]) if records else []


def train_functionality(records: list[FunctionProgramRecord], hp: Hyperparams = Hyperparams(),
                        functions: str = "core") -> FunctionalityModel:
    samples, labels, pids = [], [], []
    for r in _ordered(records):
        try:
            samples.append(graph_sample(r, functions, hp.gnn.bag_dim))
        except NoFunctionsSelected as exc:
            log.warning("skipping %s", exc)
            continue
        labels.append(r.functionality_label)
        pids.append(r.program_id)
    res = fit_gnn(samples, labels, pids, hp.gnn, hp.gnn_train)
    return FunctionalityModel(hp.gnn, res.params, res.seen, functions, hp.gnn_train.batch)


# persistence ---------------------------------------------------------------

def _pack(params: dict[str, np.ndarray]) -> dict:
    return {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(params.items())}


def _unpack(data: dict, expected: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    if set(data) != set(expected):
        raise ModelFormatError(f"parameter names differ: {sorted(set(data) ^ set(expected))}")
    out = {}
    for k, ref in expected.items():
        shape = tuple(data[k]["shape"])
        if shape != ref.shape or len(data[k]["data"]) != ref.size:
            raise ModelFormatError(f"{k}: shape {shape} != {ref.shape}")
        out[k] = np.asarray(data[k]["data"], dtype=float).reshape(shape)
    return out


def _cfg_dict(cfg) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()}


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def model_to_json(model: ToolchainModel | FunctionalityModel) -> str:
    if isinstance(model, ToolchainModel):
        body = {
            "kind": "toolchain",
            "functions": model.functions,
            "batch": model.batch,
            "stage1": {"config": _cfg_dict(model.stage1_cfg), "seen": model.stage1_seen.tolist(),
                       "params": _pack(model.stage1_params)},
            "stage2": None if model.stage2 is None else {
                "classes": list(model.stage2.classes), "bias": model.stage2.bias, "vocab": model.stage2.vocab,
                "weights": model.stage2.weights.tolist()},
            "openplc_versions": list(model.openplc_versions),
        }
    else:
        body = {"kind": "functionality", "functions": model.functions, "batch": model.batch,
                "config": _cfg_dict(model.cfg), "seen": model.seen.tolist(), "params": _pack(model.params)}
    return json.dumps({"format": MODEL_FORMAT, "version": MODEL_VERSION, **body}, separators=(",", ":"))


def model_from_json(text: str) -> ToolchainModel | FunctionalityModel:
    d = json.loads(text)
    if d.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')}")
    if d["kind"] == "toolchain":
        cfg = SeqClassifierConfig(**_tuples(d["stage1"]["config"]))
        params = _unpack(d["stage1"]["params"], transformer.init_params(cfg))
        s2 = d["stage2"]
        stage2 = None
        if s2 is not None:
            w = np.asarray(s2["weights"], dtype=float)
            if w.shape != (s2["vocab"] + 9,):
                raise ModelFormatError(f"stage-2 weights have shape {w.shape}")
            stage2 = LogisticModel(tuple(s2["classes"]), w, float(s2["bias"]), int(s2["vocab"]))
        return ToolchainModel(cfg, params, np.asarray(d["stage1"]["seen"], dtype=bool), stage2,
                              tuple(d["openplc_versions"]), d["functions"], d["batch"])
    if d["kind"] == "functionality":
        cfg = GnnConfig(**_tuples(d["config"]))
        return FunctionalityModel(cfg, _unpack(d["params"], gnn.init_params(cfg)),
                                  np.asarray(d["seen"], dtype=bool), d["functions"], d["batch"])
    raise ModelFormatError(f"unknown model kind {d['kind']!r}")


__all__ = ["FAMILIES", "LABELS", "PLATFORMS", "FunctionalityModel", "ModelFormatError", "ToolchainModel",
           "fit_gnn", "fit_stage1", "fit_stage2", "model_from_json", "model_to_json", "predict_stage1",
           "train_functionality", "train_toolchain"]
