"""Models for toolchain and functionality prediction, on a small in-repo gradient tape."""

from .autodiff import Tensor, const, param
from .config import (GnnConfig, Hyperparams, SeqClassifierConfig, Stage2Config, TrainConfig, hyperparams_from_dict,
                     load_hyperparams)
from .features import (PAD, SELECTIONS, GraphBatch, GraphSample, NoFunctionsSelected, graph_sample, make_batch,
                       node_features, select_functions, stage1_features, stage2_features, token_index)
from .models import (MODEL_FORMAT, MODEL_VERSION, FunctionalityModel, ModelFormatError, ToolchainModel, fit_gnn,
                     fit_stage1, fit_stage2, model_from_json, model_to_json, predict_stage1, train_functionality,
                     train_toolchain)
from .stage2 import VERSIONS, LogisticModel, SingleClassTraining, train_stage2
from .train import Adam, EmptyTrainingFold, FitResult, class_weights, fit, masked_argmax, validation_split

__all__ = [
    "Adam", "EmptyTrainingFold", "FitResult", "FunctionalityModel", "GnnConfig", "GraphBatch", "GraphSample",
    "Hyperparams", "LogisticModel", "MODEL_FORMAT", "MODEL_VERSION", "ModelFormatError", "NoFunctionsSelected",
    "PAD", "SELECTIONS", "SeqClassifierConfig", "SingleClassTraining", "Stage2Config", "Tensor", "ToolchainModel",
    "TrainConfig", "VERSIONS", "class_weights", "const", "fit", "fit_gnn", "fit_stage1", "fit_stage2",
    "graph_sample", "hyperparams_from_dict", "load_hyperparams", "make_batch", "masked_argmax", "model_from_json",
    "model_to_json", "node_features", "param", "predict_stage1", "select_functions", "stage1_features",
    "stage2_features", "token_index", "train_functionality", "train_stage2", "train_toolchain",
    "validation_split",
]
