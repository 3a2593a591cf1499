"""scikit-learn compatible wrapper around AUM gradient descent."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .descent import DEFAULT_GRID, TrainConfig, train
from .error_model import ErrorModel, binary_breakpoints
from .roc import aum, roc_auc


def _error_model(y, breakpoints, n_samples, what="y"):
    if (y is None) == (breakpoints is None):
        raise ValueError(f"pass exactly one of {what} or breakpoints")
    if breakpoints is not None:
        if not isinstance(breakpoints, ErrorModel):
            raise TypeError("breakpoints must be an ErrorModel")
        model = breakpoints
    else:
        y = np.asarray(y)
        if y.ndim != 1:
            raise ValueError(f"{what} must be 1-d")
        labels = np.where(y == 0, -1, y) if set(np.unique(y)) <= {0, 1} else y
        model = binary_breakpoints(labels)
    if model.n_examples != n_samples:
        raise ValueError(
            f"{n_samples} samples but the error model has {model.n_examples} examples")
    return model


class AUMLinearModel(BaseEstimator):
    """Linear scorer ``X @ coef_`` trained to minimize AUM.

    Each gradient step picks its learning rate from the exact AUM/AUC
    path along the negative gradient. Targets are binary labels in
    {-1, 1} (or {0, 1}), or an :class:`ErrorModel` passed as
    ``breakpoints`` for problems such as changepoint detection.

    Parameters
    ----------
    variant : {'first_min', 'linear', 'quadratic', 'max_auc_validation', 'grid'}
        Line search stopping rule, or ``'grid'`` for a fixed grid of steps.
    aum_tolerance : float
        Stop when subtrain AUM decreases by less than this.
    max_steps : int
        Maximum number of gradient steps.
    grid : sequence of float, optional
        Step sizes tried by the grid variant.
    init : {'gaussian', 'zeros'}
    init_scale : float
    random_state : int
    """

    def __init__(self, variant="first_min", aum_tolerance=1e-3, max_steps=100,
                 grid=None, init="gaussian", init_scale=1.0, random_state=0):
        self.variant = variant
        self.aum_tolerance = aum_tolerance
        self.max_steps = max_steps
        self.grid = grid
        self.init = init
        self.init_scale = init_scale
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            variant=self.variant, aum_tolerance=self.aum_tolerance,
            max_steps=self.max_steps,
            grid=DEFAULT_GRID if self.grid is None else tuple(self.grid),
            seed=self.random_state, init=self.init, init_scale=self.init_scale,
            record_time=False)

    def fit(self, X, y=None, *, breakpoints=None, X_val=None, y_val=None,
            breakpoints_val=None):
        X = check_array(X, dtype=float)
        model = _error_model(y, breakpoints, X.shape[0])
        model_val = None
        if X_val is not None:
            X_val = check_array(X_val, dtype=float)
            model_val = _error_model(y_val, breakpoints_val, X_val.shape[0], "y_val")
        self.coef_, self.train_log_ = train(X, model, X_val, model_val, self._config())
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = self.train_log_.n_steps
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_

    def predict(self, X):
        """Real-valued predictions (scores, or log penalties for changepoints)."""
        return self.decision_function(X)

    def score(self, X, y=None, *, breakpoints=None):
        """AUC of the predictions on ``X``."""
        pred = self.decision_function(X)
        return roc_auc(pred, _error_model(y, breakpoints, len(pred)))

    def aum_score(self, X, y=None, *, breakpoints=None):
        pred = self.decision_function(X)
        return aum(pred, _error_model(y, breakpoints, len(pred)))
