from .cocob import CocobState, cocob_update
from .lstm import LstmCellParams, LstmState, cell_forward
from .model import NetworkConfig, RnnModel, RnnPredictor, bptt_gradients, predict_iterative
from .training import best_trial, search_hyperparameters, train_global, tune_hyperparameters

__all__ = [
    "CocobState", "cocob_update", "LstmCellParams", "LstmState", "cell_forward", "NetworkConfig",
    "RnnModel", "RnnPredictor", "bptt_gradients", "predict_iterative", "best_trial",
    "search_hyperparameters", "train_global", "tune_hyperparameters",
]
