"""Binary classifiers and their evaluation."""

from .metrics import ConfusionMatrix, Evaluation, confusion_matrix, evaluate_predictions, f_beta, scores_from_matrix
from .models import (
    DEFAULT_PARAMS,
    DISPLAY_NAMES,
    KINDS,
    TREE_KINDS,
    TrainedModel,
    evaluate,
    fit,
    load_model,
    log_loss,
    read_evaluation_csv,
    save_model,
    write_evaluation_csv,
)
from .trees import Tree

__all__ = [
    "ConfusionMatrix", "Evaluation", "confusion_matrix", "evaluate_predictions", "f_beta",
    "scores_from_matrix", "DEFAULT_PARAMS", "DISPLAY_NAMES", "KINDS", "TREE_KINDS", "TrainedModel",
    "evaluate", "fit", "load_model", "log_loss", "read_evaluation_csv", "save_model",
    "write_evaluation_csv", "Tree",
]
