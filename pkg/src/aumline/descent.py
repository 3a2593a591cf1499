"""Full-batch gradient descent on AUM with an exact line search per step."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import path as _path
from .error_model import ErrorModel
from .roc import aum, grid_evaluate, roc_auc

TRAIN_VARIANTS = ("first_min", "linear", "quadratic", "max_auc_validation", "grid")
DEFAULT_GRID = tuple(10.0 ** k for k in range(-6, 7))


def aum_subgradient(predictions, model: ErrorModel) -> np.ndarray:
    """Gradient of AUM with respect to each example's prediction.

    Raising prediction ``i`` lowers its thresholds, so each of its
    breakpoints contributes ``M_above - M_below``, the min(FPR, FNR) on
    the two intervals adjacent to that threshold. Ties are ordered by
    breakpoint index, which gives a subgradient there.
    """
    pred = np.asarray(predictions, dtype=float).ravel()
    thr = model.value - pred[model.example]
    order = np.lexsort((np.arange(len(thr)), thr))
    fp = np.cumsum(model.delta_fp[order])[:-1]
    # FN as a suffix sum is exactly zero above the last FN jump, so
    # separated predictions give an exactly zero gradient
    fn = -np.cumsum(model.delta_fn[order][::-1])[::-1][1:]
    m = np.r_[0.0, np.minimum(fp, fn), 0.0]
    contrib = m[1:] - m[:-1]
    return np.bincount(model.example[order], weights=contrib,
                       minlength=model.n_examples)


def descent_direction(X, g) -> np.ndarray:
    """Negative gradient in weight space for predictions ``X @ w``."""
    return -(np.asarray(X, dtype=float).T @ np.asarray(g, dtype=float))


@dataclass
class TrainConfig:
    variant: str = "first_min"
    aum_tolerance: float = 1e-3
    max_steps: int = 100
    grid: tuple = DEFAULT_GRID
    seed: int = 0
    init: str = "gaussian"
    init_scale: float = 1.0
    max_events: int | None = None
    record_time: bool = True

    def __post_init__(self):
        if self.variant not in TRAIN_VARIANTS:
            raise ValueError(
                f"unknown variant {self.variant!r}; expected one of {TRAIN_VARIANTS}")
        if not self.aum_tolerance > 0:
            raise ValueError("aum_tolerance must be > 0")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be >= 1")
        if self.init not in ("zeros", "gaussian"):
            raise ValueError("init must be 'zeros' or 'gaussian'")
        if self.variant == "grid":
            self.grid = tuple(float(s) for s in self.grid)
            if not self.grid or min(self.grid) < 0:
                raise ValueError("grid must be a non-empty list of steps >= 0")

    def initial_weights(self, p: int) -> np.ndarray:
        if self.init == "zeros":
            return np.zeros(p)
        rng = np.random.default_rng(self.seed)
        return self.init_scale * rng.standard_normal(p)


class LogRow(NamedTuple):
    step: int
    step_size: float
    aum_subtrain: float
    auc_subtrain: float
    auc_validation: float
    events_explored: int
    elapsed_ns: int


LOG_COLUMNS = LogRow._fields


@dataclass
class TrainLog:
    """One row per gradient step; row 0 describes the initial model."""

    rows: list = field(default_factory=list)
    stop_reason: str = ""

    def append(self, *values):
        self.rows.append(LogRow(*values))

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def n_steps(self) -> int:
        """Gradient steps taken, excluding the initial row."""
        return len(self.rows) - 1

    def max_validation_auc(self) -> float:
        vals = self.column("auc_validation")
        return float(np.nanmax(vals)) if np.any(~np.isnan(vals)) else math.nan

    def mean_events(self) -> float:
        ev = self.column("events_explored")[1:]
        return float(ev.mean()) if len(ev) else 0.0

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in self.rows:
            writer.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3]),
                             "" if math.isnan(r[4]) else repr(r[4]), r[5], r[6]])


def _line_search_step(w, d, X, model, variant, max_events):
    lines = _path.build_lines(w, d, X, model)
    search = "max_auc" if variant == "max_auc_validation" else variant
    p = _path.run(_path.init(lines, model), search, max_events)
    objective = "max_auc" if variant == "max_auc_validation" else "min_aum"
    return _path.choose_step(p, objective), p.n_events


def train(X_subtrain, model_subtrain: ErrorModel, X_validation=None,
          model_validation: ErrorModel | None = None,
          config: TrainConfig | None = None, w0=None):
    """Learn linear weights by AUM gradient descent with line search.

    Returns ``(weights, TrainLog)``. Subtrain-objective variants stop
    when AUM decreases by less than ``aum_tolerance``; a step that would
    increase subtrain AUM (possible only with a coarse grid) is rejected.
    ``max_auc_validation`` picks each step by validation AUC along the
    subtrain descent direction and stops once subtrain AUM changes by
    less than the tolerance.
    """
    config = config or TrainConfig()
    X = np.asarray(X_subtrain, dtype=float)
    has_val = X_validation is not None and model_validation is not None
    if config.variant == "max_auc_validation" and not has_val:
        raise ValueError("max_auc_validation needs validation data")
    Xv = np.asarray(X_validation, dtype=float) if has_val else None
    if has_val and Xv.shape[1] != X.shape[1]:
        raise ValueError("subtrain and validation feature counts differ")

    w = config.initial_weights(X.shape[1]) if w0 is None else np.array(w0, dtype=float)
    clock = time.perf_counter_ns if config.record_time else (lambda: 0)

    def evaluate(weights):
        pred = X @ weights
        val = roc_auc(Xv @ weights, model_validation) if has_val else math.nan
        return pred, aum(pred, model_subtrain), roc_auc(pred, model_subtrain), val

    pred, cur_aum, cur_auc, cur_val = evaluate(w)
    log = TrainLog()
    log.append(0, 0.0, cur_aum, cur_auc, cur_val, 0, 0)
    log.stop_reason = "max_steps"
    for t in range(1, int(config.max_steps) + 1):
        start = clock()
        d = descent_direction(X, aum_subgradient(pred, model_subtrain))
        if not np.any(d):
            log.stop_reason = "zero_direction"
            break
        if config.variant == "grid":
            table = grid_evaluate(w, d, X, model_subtrain, config.grid)
            step = min(table, key=lambda r: (r[1], r[0]))[0]
            events = len(table)
        elif config.variant == "max_auc_validation":
            step, events = _line_search_step(w, d, Xv, model_validation,
                                             config.variant, config.max_events)
        else:
            step, events = _line_search_step(w, d, X, model_subtrain,
                                             config.variant, config.max_events)
        w_new = w + step * d
        new_pred, new_aum, new_auc, new_val = evaluate(w_new)
        elapsed = clock() - start
        decrease = cur_aum - new_aum
        if config.variant != "max_auc_validation" and decrease < 0:
            log.stop_reason = "no_decrease"
            break
        w, pred = w_new, new_pred
        cur_aum = new_aum
        log.append(t, float(step), new_aum, new_auc, new_val, int(events), int(elapsed))
        change = abs(decrease) if config.variant == "max_auc_validation" else decrease
        if change < config.aum_tolerance:
            log.stop_reason = "converged"
            break
    return w, log
