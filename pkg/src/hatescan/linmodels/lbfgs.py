"""Limited-memory BFGS with a backtracking Armijo line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConvergenceError, ParameterError

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    c1: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 50
    tol: float = 1e-6
    max_iter: int = 1000

    def __post_init__(self):
        if self.memory < 1:
            raise ParameterError("L-BFGS memory must be >= 1")
        if not 0 < self.shrink < 1 or not 0 < self.c1 < 1:
            raise ParameterError("line search needs 0 < c1 < 1 and 0 < shrink < 1")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")

    def to_dict(self) -> dict:
        return {"memory": self.memory, "c1": self.c1, "shrink": self.shrink,
                "max_backtracks": self.max_backtracks, "tol": self.tol, "max_iter": self.max_iter}


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    iterations: int
    converged: bool
    grad_norm: float
    f_history: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_iter"


def _two_loop(g, s_hist, y_hist, rho_hist):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def lbfgs_minimize(objective: Objective, x0, cfg: LbfgsConfig = LbfgsConfig()) -> LbfgsResult:
    """Minimize a smooth function given a ``x -> (value, gradient)`` oracle.

    Stops when the largest absolute gradient entry drops to ``cfg.tol`` or after
    ``cfg.max_iter`` iterations. Every accepted step satisfies the Armijo
    condition, so the objective never increases. Trial points with a non-finite
    value are treated as failed trials; a non-finite value at ``x0`` raises.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = objective(x)
    f = float(f)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ConvergenceError("objective is not finite at the starting point", x, f, 0)
    s_hist: deque = deque(maxlen=cfg.memory)
    y_hist: deque = deque(maxlen=cfg.memory)
    rho_hist: deque = deque(maxlen=cfg.memory)
    history = [f]

    it = 0
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= cfg.tol:
            return LbfgsResult(x, f, it, True, gnorm, history)
        if it >= cfg.max_iter:
            return LbfgsResult(x, f, it, False, gnorm, history)

        for attempt in range(2):
            if s_hist:
                d = -_two_loop(g, list(s_hist), list(y_hist), list(rho_hist))
                t = 1.0
            else:
                d = -g
                t = min(1.0, 1.0 / gnorm)
            slope = float(g @ d)
            if slope >= 0:
                # not a descent direction; fall back to steepest descent
                s_hist.clear(), y_hist.clear(), rho_hist.clear()
                d, slope, t = -g, -float(g @ g), min(1.0, 1.0 / gnorm)
            accepted = False
            for _ in range(cfg.max_backtracks):
                x_new = x + t * d
                f_new, g_new = objective(x_new)
                f_new = float(f_new)
                if np.isfinite(f_new) and f_new <= f + cfg.c1 * t * slope:
                    accepted = True
                    break
                t *= cfg.shrink
            if accepted:
                break
            if not s_hist:
                raise ConvergenceError(
                    f"line search failed after {cfg.max_backtracks} backtracks "
                    f"(iteration {it}, |g|_inf={gnorm:.3e})", x, f, it)
            # stale curvature pairs: retry once from steepest descent
            s_hist.clear(), y_hist.clear(), rho_hist.clear()

        if not np.all(np.isfinite(g_new)):
            raise ConvergenceError("gradient is not finite", x_new, f_new, it)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        it += 1
