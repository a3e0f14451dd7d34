"""L2-regularized logistic regression on sparse design matrices."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..errors import ConvergenceError, DataError, ParameterError
from .lbfgs import LbfgsConfig, lbfgs_minimize


@dataclass(frozen=True)
class LrConfig:
    """Logistic-regression settings.

    ``c_inverse_reg`` is the inverse penalty weight: the objective carries
    ``||w||^2 / (2 * c_inverse_reg)``. ``reg_key`` records whether the value was
    given directly or as a penalty weight.
    """

    c_inverse_reg: float = 0.1
    tol: float = 1e-6
    max_iter: int = 1000
    fit_bias: bool = True
    seed: int = 0
    reg_key: str = "c_inverse_reg"

    def __post_init__(self):
        if not self.c_inverse_reg > 0:
            raise ParameterError("c_inverse_reg must be positive")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "LrConfig":
        d = dict(d)
        if "penalty" in d:
            if "c_inverse_reg" in d:
                raise ParameterError("set either c_inverse_reg or penalty, not both")
            penalty = float(d.pop("penalty"))
            if penalty <= 0:
                raise ParameterError("penalty must be positive")
            d["c_inverse_reg"] = 1.0 / penalty
            d["reg_key"] = "penalty"
        return cls(**d)

    def to_dict(self) -> dict:
        return {"c_inverse_reg": self.c_inverse_reg, "tol": self.tol, "max_iter": self.max_iter,
                "fit_bias": self.fit_bias, "seed": self.seed, "reg_key": self.reg_key}


def check_training_data(X, y) -> tuple[sp.csr_matrix, np.ndarray]:
    X = sp.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be -1 or +1")
    if y.size < 2 or np.unique(y).size < 2:
        raise DataError("training data must contain both classes")
    return X, y


def logistic_objective(X, y, c_inverse_reg: float, fit_bias: bool = True):
    """Return ``theta -> (loss, grad)`` with ``theta = [w..., b]``; the bias is not penalized."""
    X = sp.csr_matrix(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    XT = X.T.tocsr()
    d = X.shape[1]
    inv_c = 1.0 / c_inverse_reg

    def objective(theta):
        w = theta[:d]
        b = theta[d] if fit_bias else 0.0
        margins = y * (X @ w + b)
        loss = 0.5 * inv_c * float(w @ w) + float(np.sum(np.logaddexp(0.0, -margins)))
        r = -y * expit(-margins)
        grad = np.empty_like(theta)
        grad[:d] = inv_c * w + XT @ r
        if fit_bias:
            grad[d] = r.sum()
        return loss, grad

    return objective


def fit_logreg(X, y, lr_cfg: LrConfig = LrConfig(), lbfgs_cfg: LbfgsConfig | None = None):
    """Fit weights and bias; returns ``(w, b, info)``."""
    X, y = check_training_data(X, y)
    # stopping rule is owned by the LR config
    lbfgs_cfg = replace(lbfgs_cfg or LbfgsConfig(), tol=lr_cfg.tol, max_iter=lr_cfg.max_iter)
    d = X.shape[1]
    objective = logistic_objective(X, y, lr_cfg.c_inverse_reg, lr_cfg.fit_bias)
    theta0 = np.zeros(d + 1 if lr_cfg.fit_bias else d)
    try:
        res = lbfgs_minimize(objective, theta0, lbfgs_cfg)
        theta, info = res.x, {"status": res.status, "iterations": res.iterations,
                              "grad_norm": res.grad_norm, "objective": res.f}
        converged = res.converged
    except ConvergenceError as exc:
        # line search stalled (typically at roundoff level); keep the last iterate
        theta = exc.x
        _, g = objective(theta)
        converged = False
        info = {"status": "line_search_failed", "iterations": exc.iterations,
                "grad_norm": float(np.max(np.abs(g))), "objective": exc.f}
    info["converged"] = converged
    w = theta[:d].copy()
    b = float(theta[d]) if lr_cfg.fit_bias else 0.0
    return w, b, info
