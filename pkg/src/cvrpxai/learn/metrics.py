"""Confusion matrix, precision, recall and the F-beta score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def as_array(self) -> np.ndarray:
        """[[TN, FP], [FN, TP]]"""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]])


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    if y_true.shape != y_pred.shape:
        raise ValueError("label and prediction shapes differ")
    return ConfusionMatrix(
        tn=int(np.sum(~y_true & ~y_pred)),
        fp=int(np.sum(~y_true & y_pred)),
        fn=int(np.sum(y_true & ~y_pred)),
        tp=int(np.sum(y_true & y_pred)),
    )


def f_beta(precision: float, recall: float, beta: float = 1.0) -> float:
    """(beta^2 + 1) P R / (beta^2 P + R); 0 when both are 0."""
    denom = beta ** 2 * precision + recall
    if denom == 0:
        return 0.0
    return (beta ** 2 + 1) * precision * recall / denom


@dataclass(frozen=True)
class Evaluation:
    matrix: ConfusionMatrix
    precision: float
    recall: float
    f_beta: float
    beta: float = 1.0
    precision_undefined: bool = False
    recall_undefined: bool = False

    @property
    def degenerate(self) -> bool:
        return self.precision_undefined or self.recall_undefined


def scores_from_matrix(cm: ConfusionMatrix, beta: float = 1.0) -> Evaluation:
    p_undef = cm.tp + cm.fp == 0
    r_undef = cm.tp + cm.fn == 0
    precision = 0.0 if p_undef else cm.tp / (cm.tp + cm.fp)
    recall = 0.0 if r_undef else cm.tp / (cm.tp + cm.fn)
    return Evaluation(cm, precision, recall, f_beta(precision, recall, beta), beta, p_undef, r_undef)


def evaluate_predictions(y_true, y_pred, beta: float = 1.0) -> Evaluation:
    if len(y_true) == 0:
        raise ValueError("empty evaluation set")
    return scores_from_matrix(confusion_matrix(y_true, y_pred), beta)
