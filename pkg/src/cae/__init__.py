"""Causal autoencoder: DAG-constrained representation learning for robust domain adaptation."""
from .dag import DagFitConfig, ThresholdedDag, acyclicity_h, fit_dag, shd, threshold
from .data import Dataset, fit_scaler, load_csv, split
from .estimator import CausalAutoEncoder
from .graph import DagGraph, MarkovBlanket, markov_blanket, split_representations
from .stats import ResultsTable, average_ranks, nemenyi_cd
from .trainer import PRESETS, TrainConfig, TrainedModel, evaluate, predict, train

__all__ = [
    "CausalAutoEncoder", "DagFitConfig", "DagGraph", "Dataset", "MarkovBlanket", "PRESETS",
    "ResultsTable", "ThresholdedDag", "TrainConfig", "TrainedModel", "acyclicity_h", "average_ranks",
    "evaluate", "fit_dag", "fit_scaler", "load_csv", "markov_blanket", "nemenyi_cd", "predict",
    "shd", "split", "split_representations", "threshold", "train",
]
__version__ = "0.1.0"
