"""Linear SVM (hinge loss, unpenalized bias) trained in the dual.

The dual of ``min 1/2 ||w||^2 + c * sum_i max(0, 1 - y_i (w.x_i + b))`` is

    min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= c,  sum_i y_i a_i = 0,

with ``Q_ij = y_i y_j x_i.x_j``. The equality constraint (a consequence of the
free bias) means a single coordinate cannot move on its own, so each step
updates the maximal-violating pair of coordinates in closed form while keeping
``w = sum_i a_i y_i x_i`` in sync.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..seeding import substream
from .logreg import check_training_data

_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    tol: float = 1e-4
    # one pass = n pair updates
    max_iter: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError("SVM c must be positive")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    def to_dict(self) -> dict:
        return {"c": self.c, "tol": self.tol, "max_iter": self.max_iter, "seed": self.seed}


def svm_primal_objective(X, y, w, b, c) -> float:
    margins = np.asarray(y) * (X @ w + b)
    return 0.5 * float(w @ w) + c * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def svm_dual_objective(alpha, w) -> float:
    """Dual objective (to be maximized) for a feasible ``alpha`` with ``w = X'(alpha*y)``."""
    return float(np.sum(alpha)) - 0.5 * float(w @ w)


def _pick(candidates, values, priority, largest):
    vals = values[candidates]
    best = vals.max() if largest else vals.min()
    tied = candidates[vals == best]
    return int(tied[np.argmin(priority[tied])]), float(best)


def fit_linear_svm(X, y, cfg: SvmConfig = SvmConfig()):
    """Return ``(w, b, info)``; ``info`` carries alpha and the final KKT violation."""
    X, y = check_training_data(X, y)
    n, d = X.shape
    c = cfg.c
    rows = [(X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]])
            for i in range(n)]
    # equal violations are resolved by a seeded priority order
    priority = substream(cfg.seed, "svm-order").permutation(n)
    pos = y > 0
    alpha = np.zeros(n)
    w = np.zeros(d)
    grad = -np.ones(n)  # y_i w.x_i - 1
    buf = np.zeros(d)
    idx = np.arange(n)

    converged = False
    violation = np.inf
    updates = 0
    max_updates = cfg.max_iter * n
    while True:
        score = -y * grad
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        i, m_up = _pick(idx[up], score, priority, largest=True)
        j, m_low = _pick(idx[low], score, priority, largest=False)
        violation = m_up - m_low
        if violation <= cfg.tol:
            converged = True
            break
        if updates >= max_updates:
            break
        # direction: alpha_i += y_i t, alpha_j -= y_j t  =>  w += t (x_i - x_j)
        ii, iv = rows[i]
        ji, jv = rows[j]
        buf[ii] += iv
        buf[ji] -= jv
        touched = np.union1d(ii, ji)
        diff = buf[touched]
        curvature = max(float(diff @ diff), _TAU)
        t = violation / curvature
        t = min(t, c - alpha[i] if pos[i] else alpha[i])
        t = min(t, alpha[j] if pos[j] else c - alpha[j])
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        alpha[i] = min(max(alpha[i], 0.0), c)
        alpha[j] = min(max(alpha[j], 0.0), c)
        w[touched] += t * diff
        grad += t * y * (X @ buf)
        buf[touched] = 0.0
        updates += 1

    # refresh to shed accumulated drift before reading off the bias
    w = X.T @ (alpha * y)
    grad = y * (X @ w) - 1.0
    score = -y * grad
    free = (alpha > _TAU * c) & (alpha < c * (1 - 1e-12))
    if np.any(free):
        b = float(np.mean(score[free]))
    else:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        hi = score[up].max() if np.any(up) else score[low].min()
        lo = score[low].min() if np.any(low) else hi
        b = 0.5 * (hi + lo)
    info = {
        "converged": converged,
        "status": "converged" if converged else "max_iter",
        "updates": updates,
        "kkt_violation": float(violation),
        "alpha": alpha,
        "primal": svm_primal_objective(X, y, w, b, c),
        "dual": svm_dual_objective(alpha, w),
    }
    return np.asarray(w, dtype=np.float64), b, info
