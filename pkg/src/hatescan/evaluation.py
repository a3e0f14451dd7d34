"""Confusion matrices, precision/recall/F1, rank-based AUROC and cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import HATE_ORDER, SENTIMENT_ORDER, FoldPlan, HateLabel, LabeledComment, dump_csv
from .errors import DataError, HatescanError, ParameterError
from .features import fit_vocabulary
from .linmodels.model import (
    OvrModel,
    TrainSpec,
    decision_score,
    featurize,
    fit_pipeline,
    ovr_scores,
    predict,
)


def _value(label) -> str:
    return getattr(label, "value", label)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[p, t]`` = number of items predicted as class ``p`` whose true class is ``t``."""

    counts: np.ndarray
    class_order: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def cell(self, predicted, true) -> int:
        order = [_value(c) for c in self.class_order]
        return int(self.counts[order.index(_value(predicted)), order.index(_value(true))])

    def to_dict(self) -> dict:
        return {"class_order": [_value(c) for c in self.class_order],
                "predicted_by_true": self.counts.tolist()}


def confusion_matrix(y_true: Sequence, y_pred: Sequence, class_order: Sequence) -> ConfusionMatrix:
    if len(y_true) != len(y_pred):
        raise ParameterError(f"{len(y_true)} true labels but {len(y_pred)} predictions")
    if not y_true:
        raise ParameterError("confusion matrix of an empty evaluation set")
    order = [_value(c) for c in class_order]
    pos = {c: i for i, c in enumerate(order)}
    counts = np.zeros((len(order), len(order)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        t, p = _value(t), _value(p)
        if t not in pos or p not in pos:
            raise ParameterError(f"label {t if t not in pos else p!r} not in class order {order}")
        counts[pos[p], pos[t]] += 1
    return ConfusionMatrix(counts, tuple(class_order))


def binary_confusion(tn: int, fp: int, fn: int, tp: int, classes=(0, 1)) -> ConfusionMatrix:
    """Build a 2x2 matrix from the usual cell names (first class is negative)."""
    return ConfusionMatrix(np.array([[tn, fn], [fp, tp]], dtype=np.int64), tuple(classes))


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)


def metrics_from_cm(cm: ConfusionMatrix) -> dict:
    """Accuracy, per-class precision/recall/F1/support, macro and weighted F1.

    Zero denominators yield 0 and add the class to ``zero_division``.
    """
    total = cm.total
    if total <= 0:
        raise ParameterError("confusion matrix is empty")
    counts = cm.counts
    per_class = {}
    flagged = []
    for k, cls in enumerate(cm.class_order):
        tp = int(counts[k, k])
        predicted = int(counts[k, :].sum())
        support = int(counts[:, k].sum())
        if predicted == 0 or support == 0:
            flagged.append(_value(cls))
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        per_class[_value(cls)] = {"precision": precision, "recall": recall,
                                  "f1": f1_score(precision, recall), "support": support}
    f1s = [m["f1"] for m in per_class.values()]
    return {
        "accuracy": int(np.trace(counts)) / total,
        "per_class": per_class,
        "macro_f1": sum(f1s) / len(f1s),
        "weighted_f1": sum(m["f1"] * m["support"] for m in per_class.values()) / total,
        "zero_division": flagged,
    }


def midranks(values) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size)
    start = 0
    n = values.size
    while start < n:
        stop = start + 1
        while stop < n and sorted_vals[stop] == sorted_vals[start]:
            stop += 1
        ranks[order[start:stop]] = 0.5 * (start + 1 + stop)
        start = stop
    return ranks


def auroc_binary(scores, y_true) -> float:
    """AUROC from the Mann-Whitney rank-sum of the positive class (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray([_is_positive(v) for v in y_true], dtype=bool)
    if scores.shape[0] != y.shape[0]:
        raise ParameterError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC is undefined unless both classes are present")
    rank_sum = float(midranks(scores)[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _is_positive(v) -> bool:
    if isinstance(v, HateLabel):
        return v is HateLabel.HATE
    if isinstance(v, str):
        return v in ("hate", "1")
    return bool(v)


def auroc_ovr(score_matrix, y_true: Sequence, class_order: Sequence = SENTIMENT_ORDER) -> dict:
    """Per-class one-vs-rest AUROC; column ``k`` of ``score_matrix`` scores ``class_order[k]``."""
    scores = np.asarray(score_matrix, dtype=np.float64)
    truth = [_value(t) for t in y_true]
    out = {}
    for k, cls in enumerate(class_order):
        name = _value(cls)
        mask = [t == name for t in truth]
        if not any(mask):
            raise DataError(f"class {name} is absent; per-class AUROC undefined")
        out[name] = auroc_binary(scores[:, k], mask)
    return out


@dataclass
class EvalReport:
    accuracy: float
    per_class: dict
    macro_f1: float
    weighted_f1: float
    auroc: dict
    confusion: ConfusionMatrix
    zero_division: list = field(default_factory=list)
    converged: bool = True
    n: int = 0

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "per_class": self.per_class, "macro_f1": self.macro_f1,
                "weighted_f1": self.weighted_f1, "auroc": self.auroc,
                "confusion": self.confusion.to_dict(), "zero_division": self.zero_division,
                "converged": self.converged, "n": self.n}


def report_from_predictions(y_true, y_pred, class_order, auroc: dict, converged=True) -> EvalReport:
    cm = confusion_matrix(y_true, y_pred, class_order)
    m = metrics_from_cm(cm)
    return EvalReport(m["accuracy"], m["per_class"], m["macro_f1"], m["weighted_f1"], auroc, cm,
                      m["zero_division"], converged, cm.total)


def score_docs(model, docs) -> np.ndarray:
    """Raw decision scores: one per doc, or an item x class matrix for OvR models.

    AUROC is computed on these rather than on probabilities, which saturate to
    exact ties far from the boundary.
    """
    vecs = [featurize(model, d) for d in docs]
    if isinstance(model, OvrModel):
        return np.array([list(ovr_scores(model, v).values()) for v in vecs]).reshape(len(vecs), 3)
    return np.array([decision_score(model, v) for v in vecs])


def evaluate_model(model, docs, labels, threshold: float = 0.5) -> EvalReport:
    """Score ``docs`` and compare against ``labels``.

    AUROC entries are ``None`` when the evaluated set lacks a class.
    """
    if not docs:
        raise DataError("nothing to evaluate")
    vecs = [featurize(model, d) for d in docs]
    preds = [predict(model, v, threshold) for v in vecs]
    scores = score_docs(model, docs)
    if isinstance(model, OvrModel):
        order = SENTIMENT_ORDER
        auroc = {}
        for k, cls in enumerate(order):
            mask = [_value(t) == cls.value for t in labels]
            auroc[cls.value] = auroc_binary(scores[:, k], mask) if 0 < sum(mask) < len(mask) else None
    else:
        order = HATE_ORDER
        pos = [HateLabel(_value(t)) is HateLabel.HATE for t in labels]
        auroc = {"hate": auroc_binary(scores, pos) if 0 < sum(pos) < len(pos) else None}
    return report_from_predictions(labels, preds, order, auroc, model.converged)


@dataclass
class CvReport:
    per_fold: list
    mean: dict
    std: dict
    plan: FoldPlan
    models: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"k": self.plan.k, "seed": self.plan.seed, "strata_key": self.plan.strata_key,
                "mean": self.mean, "std": self.std,
                "per_fold": [r.to_dict() for r in self.per_fold]}

    def to_csv(self) -> str:
        rows = []
        for fold, rep in enumerate(self.per_fold):
            for cls, m in rep.per_class.items():
                # a binary AUROC applies to both classes
                auc = rep.auroc.get(cls) if len(rep.auroc) > 1 else next(iter(rep.auroc.values()))
                rows.append({"fold": fold, "class": cls, "precision": repr(m["precision"]),
                             "recall": repr(m["recall"]), "f1": repr(m["f1"]), "support": m["support"],
                             "auroc": "" if auc is None else repr(auc),
                             "accuracy": repr(rep.accuracy), "macro_f1": repr(rep.macro_f1)})
        header = ["fold", "class", "precision", "recall", "f1", "support", "auroc", "accuracy", "macro_f1"]
        return dump_csv(rows, header)


def aggregate_folds(reports: Sequence[EvalReport]) -> tuple[dict, dict]:
    """Unweighted mean and population std over folds; undefined AUROCs are skipped."""
    series: dict[str, list] = {"accuracy": [], "macro_f1": [], "weighted_f1": []}
    for rep in reports:
        series["accuracy"].append(rep.accuracy)
        series["macro_f1"].append(rep.macro_f1)
        series["weighted_f1"].append(rep.weighted_f1)
        for cls, m in rep.per_class.items():
            series.setdefault(f"f1[{cls}]", []).append(m["f1"])
        for cls, v in rep.auroc.items():
            series.setdefault(f"auroc[{cls}]", [])
            if v is not None:
                series[f"auroc[{cls}]"].append(v)
    mean, std = {}, {}
    for key, vals in series.items():
        if vals:
            mean[key] = float(np.mean(vals))
            std[key] = float(np.std(vals))
        else:
            mean[key] = std[key] = math.nan
    return mean, std


def cross_validate(labeled: Sequence[LabeledComment], docs: Mapping, spec: TrainSpec,
                   fold_plan: FoldPlan, pipeline_fingerprint: str = "") -> CvReport:
    """k-fold evaluation; vocabulary and model are refit on each fold's training part."""
    key = spec.task
    assigned = fold_plan.fold_assignments
    missing = [x.id for x in labeled if x.id not in assigned]
    if missing or len(assigned) != len(labeled):
        raise DataError("fold plan does not match the labeled set")
    reports, models = [], []
    for fold in range(fold_plan.k):
        train = [x for x in labeled if assigned[x.id] != fold]
        held = [x for x in labeled if assigned[x.id] == fold]
        train_docs = [docs[x.id] for x in train]
        try:
            vocab = fit_vocabulary(train_docs, spec.features)
            model = fit_pipeline(train_docs, [x.label(key) for x in train], spec, vocab,
                                 pipeline_fingerprint)
            rep = evaluate_model(model, [docs[x.id] for x in held], [x.label(key) for x in held])
        except HatescanError as exc:
            exc.args = (f"fold {fold}: {exc}",) + exc.args[1:]
            raise
        reports.append(rep)
        models.append(model)
    mean, std = aggregate_folds(reports)
    return CvReport(reports, mean, std, fold_plan, models)
