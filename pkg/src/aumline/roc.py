"""ROC curve, AUC and AUM computed from scratch at fixed predictions.

These functions sort all breakpoint thresholds and take cumulative sums,
so each call costs O(B log B). They are the reference that the
incremental step-size path is checked against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .error_model import ErrorModel


@dataclass(frozen=True)
class RocCurve:
    """ROC points obtained by sweeping a constant added to predictions.

    ``thresholds`` has one entry per distinct threshold (ties merged);
    ``fpr`` and ``tpr`` have one more entry, point ``j`` describing the
    interval just below ``thresholds[j]`` and the last point the region
    above every threshold.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def fnr(self) -> np.ndarray:
        return 1.0 - self.tpr

    @property
    def min_vec(self) -> np.ndarray:
        """min(FPR, FNR) on each interval between consecutive thresholds."""
        return np.minimum(self.fpr, self.fnr)[1:-1]


def thresholds(predictions, model: ErrorModel) -> np.ndarray:
    """Threshold ``v_b - yhat[example_b]`` of every breakpoint."""
    pred = np.asarray(predictions, dtype=float).ravel()
    if pred.shape != (model.n_examples,):
        raise ValueError(
            f"expected {model.n_examples} predictions, got {pred.shape[0]}")
    if not np.all(np.isfinite(pred)):
        raise ValueError("predictions must be finite")
    return model.value - pred[model.example]


def roc(predictions, model: ErrorModel, tie_tol: float = 0.0) -> RocCurve:
    """ROC curve of ``predictions`` under ``model``.

    Breakpoints whose sorted thresholds differ by at most ``tie_tol``
    are merged into a single ROC step.
    """
    thr = thresholds(predictions, model)
    order = np.argsort(thr, kind="stable")
    thr = thr[order]
    new_group = np.r_[True, np.diff(thr) > tie_tol]
    starts = np.flatnonzero(new_group)
    dfp = np.add.reduceat(model.delta_fp[order], starts)
    dfn = np.add.reduceat(model.delta_fn[order], starts)
    fpr = np.r_[0.0, np.cumsum(dfp)]
    fnr = np.r_[model.fn_start, model.fn_start + np.cumsum(dfn)]
    return RocCurve(thr[starts], fpr, 1.0 - fnr)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve.

    Non-monotone error functions make the curve loop, so the result may
    fall outside [0, 1].
    """
    return float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1])) / 2)


def aum(predictions, model: ErrorModel) -> float:
    """Area under min(FPR, FNR) over the constant added to predictions."""
    thr = thresholds(predictions, model)
    order = np.argsort(thr, kind="stable")
    fp = np.cumsum(model.delta_fp[order])[:-1]
    fn = model.fn_start + np.cumsum(model.delta_fn[order])[:-1]
    return float(np.sum(np.diff(thr[order]) * np.minimum(fp, fn)))


def roc_auc(predictions, model: ErrorModel, tie_tol: float = 0.0) -> float:
    return auc(roc(predictions, model, tie_tol))


def grid_evaluate(w, d, X, model: ErrorModel, steps) -> list[tuple[float, float, float]]:
    """``(step, aum, auc)`` at predictions ``X @ (w + step * d)`` per step."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    base = X @ w
    move = X @ d
    out = []
    for s in steps:
        s = float(s)
        if not s >= 0:
            raise ValueError(f"step sizes must be >= 0, got {s}")
        pred = base + s * move
        out.append((s, aum(pred, model), roc_auc(pred, model)))
    return out
