"""Classification metrics: confusion matrix, accuracy, per-class P/R/F1.

Confusion rows are true classes, columns predicted. A class whose
precision and recall are both zero has an undefined F1; it is reported as
0.0 and the class name is flagged in Metrics.undefined_f1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..learn import ClassifierModel, DomainDataset, predict


@dataclass
class Metrics:
    classes: list
    confusion: np.ndarray  # (C, C) counts, rows = true class
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    undefined_f1: list

    def per_class(self) -> list:
        return [
            {"class": c, "precision": float(p), "recall": float(r), "f1": float(f)}
            for c, p, r, f in zip(self.classes, self.precision, self.recall, self.f1)
        ]


def compute_metrics(y_true, y_pred, classes: list) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or len(y_true) == 0:
        raise ValueError("y_true and y_pred must be equal-length nonempty 1-d arrays")
    c = len(classes)
    if y_true.min() < 0 or y_true.max() >= c or y_pred.min() < 0 or y_pred.max() >= c:
        raise ValueError(f"labels out of range for {c} classes")
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)

    tp = np.diag(confusion).astype(np.float64)
    pred_totals = confusion.sum(axis=0).astype(np.float64)
    true_totals = confusion.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_totals > 0, tp / pred_totals, 0.0)
        recall = np.where(true_totals > 0, tp / true_totals, 0.0)
    denom = precision + recall
    f1 = np.where(denom > 0, 2.0 * precision * recall / np.where(denom > 0, denom, 1.0),
                  0.0)
    undefined = [classes[i] for i in range(c) if denom[i] == 0.0]
    accuracy = float(np.trace(confusion)) / float(len(y_true))
    return Metrics(list(classes), confusion, accuracy, precision, recall, f1, undefined)


def evaluate(model: ClassifierModel, dataset: DomainDataset) -> Metrics:
    """Argmax predictions on the dataset, scored against its labels."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    if dataset.labels.max() >= len(model.classes):
        raise ValueError(
            f"dataset label {int(dataset.labels.max())} outside the model's "
            f"{len(model.classes)}-class head")
    preds = predict(model, dataset.features)
    return compute_metrics(dataset.labels, preds, model.classes)
