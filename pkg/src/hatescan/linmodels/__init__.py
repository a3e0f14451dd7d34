"""Linear classifiers: logistic regression (L-BFGS), linear SVM, one-vs-rest."""

from .lbfgs import LbfgsConfig, LbfgsResult, lbfgs_minimize
from .logreg import LrConfig, fit_logreg, logistic_objective
from .model import (
    LinearModel,
    OvrModel,
    TrainSpec,
    decision_score,
    featurize,
    fit_pipeline,
    load_model,
    model_from_dict,
    model_to_dict,
    ovr_scores,
    predict,
    predict_proba,
    save_model,
    sigmoid,
    train_fingerprint,
    train_linear_svm,
    train_logreg,
    train_ovr,
)
from .svm import SvmConfig, fit_linear_svm, svm_dual_objective, svm_primal_objective
from .tuning import DEFAULT_C_GRID, tune_svm_c

__all__ = [
    "DEFAULT_C_GRID", "LbfgsConfig", "LbfgsResult", "LinearModel", "LrConfig", "OvrModel", "SvmConfig",
    "TrainSpec", "decision_score", "featurize", "fit_linear_svm", "fit_logreg", "fit_pipeline",
    "lbfgs_minimize", "load_model", "logistic_objective", "model_from_dict", "model_to_dict",
    "ovr_scores", "predict", "predict_proba", "save_model", "sigmoid", "svm_dual_objective",
    "svm_primal_objective", "train_fingerprint", "train_linear_svm", "train_logreg", "train_ovr",
    "tune_svm_c",
]
