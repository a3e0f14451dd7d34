"""Trained linear models, scoring, prediction and the JSON model artifact."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..corpus import HateLabel, SENTIMENT_ORDER, SentimentLabel
from ..errors import DataError, ParameterError, UnsupportedOperation
from ..features import FeatureConfig, SparseVector, Vocabulary, idf, to_csr, vectorize, vectorize_all
from ..textprep import TokenDoc
from .lbfgs import LbfgsConfig
from .logreg import LrConfig, fit_logreg
from .svm import SvmConfig, fit_linear_svm

FORMAT_VERSION = 1


def _fingerprint(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    positive_class: str
    negative_class: str
    task: str  # "hate" or "sentiment_ovr_component"
    algo: str  # "lr" or "svm"
    features: FeatureConfig = FeatureConfig()
    config: dict = field(default_factory=dict)
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)
    vocabulary: Vocabulary | None = None
    pipeline_fingerprint: str = ""
    train_fingerprint: str = ""
    seed: int = 0

    @property
    def feature_mode(self) -> str:
        return self.features.mode

    @property
    def dimension(self) -> int:
        return int(self.weights.shape[0])

    @property
    def config_fingerprint(self) -> str:
        return _fingerprint({"algo": self.algo, "features": self.features.to_dict(),
                             "config": self.config})

    def idf_weights(self):
        if self.features.mode != "tfidf" or self.vocabulary is None:
            return None
        cached = self.__dict__.get("_idf")
        if cached is None:
            cached = idf(self.vocabulary)
            object.__setattr__(self, "_idf", cached)
        return cached


@dataclass(frozen=True, eq=False)
class OvrModel:
    components: dict  # SentimentLabel -> LinearModel

    def __post_init__(self):
        if set(self.components) != set(SENTIMENT_ORDER):
            raise DataError("an OvR sentiment model needs exactly the three sentiment classes")
        first = self.components[SENTIMENT_ORDER[0]]
        for comp in self.components.values():
            if comp.vocabulary is not first.vocabulary and comp.vocabulary != first.vocabulary:
                raise DataError("OvR components must share one vocabulary")
            if comp.feature_mode != first.feature_mode:
                raise DataError("OvR components must share one feature mode")

    def _first(self) -> LinearModel:
        return self.components[SENTIMENT_ORDER[0]]

    task = property(lambda self: "sentiment")
    algo = property(lambda self: self._first().algo)
    features = property(lambda self: self._first().features)
    feature_mode = property(lambda self: self._first().feature_mode)
    vocabulary = property(lambda self: self._first().vocabulary)
    pipeline_fingerprint = property(lambda self: self._first().pipeline_fingerprint)
    train_fingerprint = property(lambda self: self._first().train_fingerprint)
    seed = property(lambda self: self._first().seed)
    config = property(lambda self: self._first().config)
    dimension = property(lambda self: self._first().dimension)

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.components.values())

    def idf_weights(self):
        return self._first().idf_weights()


# ---------------------------------------------------------------- scoring

def decision_score(model: LinearModel, x: SparseVector) -> float:
    """``w.x + b``."""
    if x.dimension != model.dimension:
        raise DataError(f"vector dimension {x.dimension} != model dimension {model.dimension}")
    return x.dot(model.weights) + model.bias


def sigmoid(z):
    return expit(z)


def predict_proba(model: LinearModel, x: SparseVector) -> float:
    if model.algo != "lr":
        raise UnsupportedOperation("probabilities are only defined for logistic-regression models")
    return float(sigmoid(decision_score(model, x)))


def ovr_scores(model: OvrModel, x: SparseVector) -> dict:
    return {lab: decision_score(model.components[lab], x) for lab in SENTIMENT_ORDER}


def _label_for(model: LinearModel, positive: bool):
    value = model.positive_class if positive else model.negative_class
    return HateLabel(value) if model.task == "hate" else value


def predict(model, x: SparseVector, threshold: float = 0.5):
    """Class label for one vector.

    Binary LR models are positive iff ``p >= threshold``; SVM models iff the
    score is ``>= 0``. OvR models return the argmax class, ties resolved in the
    order neutral, pro-Israel, pro-Palestine.
    """
    if isinstance(model, OvrModel):
        scores = ovr_scores(model, x)
        best = max(scores.values())
        return next(lab for lab in SENTIMENT_ORDER if scores[lab] == best)
    if model.algo == "lr":
        return _label_for(model, predict_proba(model, x) >= threshold)
    return _label_for(model, decision_score(model, x) >= 0.0)


def featurize(model, doc: TokenDoc) -> SparseVector:
    if model.vocabulary is None:
        raise DataError("model carries no vocabulary")
    return vectorize(doc, model.vocabulary, model.features, model.idf_weights())


# ---------------------------------------------------------------- training

def train_logreg(X, y, lr_cfg: LrConfig = LrConfig(), lbfgs_cfg: LbfgsConfig | None = None,
                 positive_class: str = HateLabel.HATE.value,
                 negative_class: str = HateLabel.NO_HATE.value, task: str = "hate") -> LinearModel:
    w, b, info = fit_logreg(X, y, lr_cfg, lbfgs_cfg)
    cfg = {"lr": lr_cfg.to_dict(), "lbfgs": (lbfgs_cfg or LbfgsConfig()).to_dict()}
    return LinearModel(w, b, positive_class, negative_class, task, "lr", config=cfg,
                       converged=info["converged"], diagnostics=info, seed=lr_cfg.seed)


def train_linear_svm(X, y, svm_cfg: SvmConfig = SvmConfig(),
                     positive_class: str = HateLabel.HATE.value,
                     negative_class: str = HateLabel.NO_HATE.value, task: str = "hate") -> LinearModel:
    w, b, info = fit_linear_svm(X, y, svm_cfg)
    diag = {k: v for k, v in info.items() if k != "alpha"}
    return LinearModel(w, b, positive_class, negative_class, task, "svm",
                       config={"svm": svm_cfg.to_dict()}, converged=info["converged"],
                       diagnostics=diag, seed=svm_cfg.seed)


@dataclass(frozen=True)
class TrainSpec:
    task: str = "hate"  # hate | sentiment
    algo: str = "lr"  # lr | svm
    features: FeatureConfig = FeatureConfig()
    lr: LrConfig = LrConfig()
    lbfgs: LbfgsConfig = LbfgsConfig()
    svm: SvmConfig = SvmConfig()

    def __post_init__(self):
        if self.task not in ("hate", "sentiment"):
            raise ParameterError(f"unknown task {self.task!r}")
        if self.algo not in ("lr", "svm"):
            raise ParameterError(f"unknown algorithm {self.algo!r}")


def _train_binary(X, y, spec: TrainSpec, positive: str, negative: str, task: str) -> LinearModel:
    if spec.algo == "lr":
        return train_logreg(X, y, spec.lr, spec.lbfgs, positive, negative, task)
    return train_linear_svm(X, y, spec.svm, positive, negative, task)


def train_ovr(X, y: Sequence[SentimentLabel], spec: TrainSpec) -> OvrModel:
    """One binary model per sentiment class, each against the other two."""
    y = [SentimentLabel(v) for v in y]
    present = set(y)
    for lab in SENTIMENT_ORDER:
        if lab not in present:
            raise DataError(f"sentiment class {lab.value} is missing from the training data")
    comps = {}
    for lab in SENTIMENT_ORDER:
        yy = np.where(np.array([v is lab for v in y]), 1.0, -1.0)
        comps[lab] = _train_binary(X, yy, spec, lab.value, "rest", "sentiment_ovr_component")
    return OvrModel(comps)


def fit_pipeline(docs: Sequence[TokenDoc], labels: Sequence, spec: TrainSpec, vocabulary: Vocabulary,
                 pipeline_fingerprint: str = "", train_fingerprint: str = ""):
    """Train the task model for already-fitted ``vocabulary`` and attach provenance."""
    X = to_csr(vectorize_all(docs, vocabulary, spec.features), len(vocabulary))
    extra = dict(features=spec.features, vocabulary=vocabulary,
                 pipeline_fingerprint=pipeline_fingerprint, train_fingerprint=train_fingerprint)
    if spec.task == "hate":
        y = np.array([1.0 if HateLabel(v) is HateLabel.HATE else -1.0 for v in labels])
        return replace(_train_binary(X, y, spec, HateLabel.HATE.value, HateLabel.NO_HATE.value, "hate"),
                       **extra)
    ovr = train_ovr(X, labels, spec)
    return OvrModel({lab: replace(m, **extra) for lab, m in ovr.components.items()})


def train_fingerprint(ids: Sequence[str], seed: int) -> str:
    return _fingerprint({"ids": list(ids), "seed": seed})


# ---------------------------------------------------------------- artifact

def _component_record(m: LinearModel) -> dict:
    return {
        "positive_class": m.positive_class,
        "negative_class": m.negative_class,
        "weights": m.weights.tolist(),
        "bias": m.bias,
        "converged": m.converged,
        "diagnostics": {k: v for k, v in m.diagnostics.items() if isinstance(v, (int, float, str, bool))},
    }


def model_to_dict(model) -> dict:
    if isinstance(model, OvrModel):
        comps = [dict(_component_record(model.components[lab]), **{"class": lab.value})
                 for lab in SENTIMENT_ORDER]
    else:
        comps = None
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "ovr" if comps else "linear",
        "task": model.task,
        "algo": model.algo,
        "feature_mode": model.feature_mode,
        "features": model.features.to_dict(),
        "vocabulary": model.vocabulary.to_dict(model.feature_mode) if model.vocabulary else None,
        "config": model.config,
        "converged": model.converged,
        "seed": model.seed,
        "pipeline_fingerprint": model.pipeline_fingerprint,
        "train_fingerprint": model.train_fingerprint,
    }
    if comps:
        doc["components"] = comps
    else:
        doc.update(_component_record(model))
        doc["config_fingerprint"] = model.config_fingerprint
    return doc


def model_from_dict(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {doc.get('format_version')!r}")
    vocab = Vocabulary.from_dict(doc["vocabulary"]) if doc.get("vocabulary") else None
    common = dict(
        algo=doc["algo"],
        features=FeatureConfig(**doc["features"]),
        config=doc["config"],
        vocabulary=vocab,
        pipeline_fingerprint=doc["pipeline_fingerprint"],
        train_fingerprint=doc["train_fingerprint"],
        seed=doc["seed"],
    )

    def component(rec, task):
        weights = np.array(rec["weights"], dtype=np.float64)
        if vocab is not None and weights.shape[0] != len(vocab):
            raise DataError("weight vector length does not match the vocabulary")
        return LinearModel(weights, float(rec["bias"]), rec["positive_class"], rec["negative_class"],
                           task, converged=rec["converged"], diagnostics=rec.get("diagnostics", {}),
                           **common)

    if doc["kind"] == "ovr":
        return OvrModel({SentimentLabel(rec["class"]): component(rec, "sentiment_ovr_component")
                         for rec in doc["components"]})
    return component(doc, doc["task"])


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model artifact {path}: {exc}") from None
    return model_from_dict(doc)
