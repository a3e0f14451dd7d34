"""Cross-validated selection of the SVM regularization parameter."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Sequence

import numpy as np

from ..errors import ParameterError

DEFAULT_C_GRID = (0.01, 0.05, 0.1, 0.5, 1.0)


def tune_svm_c(train: Sequence, docs: Mapping, spec, grid: Sequence[float] = DEFAULT_C_GRID,
               k: int = 10, seed: int = 0):
    """Pick the ``c`` with the best mean cross-validated macro-F1.

    ``train`` holds labeled comments, ``docs`` maps their ids to token docs.
    Equal scores go to the smaller ``c``. Returns ``(best_c, table)`` where the
    table has one row per grid value.
    """
    from ..corpus import make_folds
    from ..evaluation import cross_validate

    grid = [float(c) for c in grid]
    if not grid:
        raise ParameterError("c grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("c grid must be strictly ascending")
    plan = make_folds(train, k, spec.task, seed)
    table = []
    best_c, best_f1 = None, -np.inf
    for c in grid:
        svm_spec = replace(spec, algo="svm", svm=replace(spec.svm, c=c))
        cv = cross_validate(train, docs, svm_spec, plan)
        mean_f1 = cv.mean["macro_f1"]
        table.append({"c": c, "mean_macro_f1": mean_f1, "std_macro_f1": cv.std["macro_f1"],
                      "mean_accuracy": cv.mean["accuracy"]})
        if mean_f1 > best_f1:
            best_c, best_f1 = c, mean_f1
    return best_c, table
