"""Synthetic problems: unbalanced binary data and looping changepoint errors."""
from __future__ import annotations

import numpy as np

from .error_model import ErrorModel, ValidationError, normalize

# per-example (FP, FN) counts on successive prediction intervals
_TEMPLATES = (
    ((0, 1), (0, 0), (0, 1), (1, 0)),  # changepoint vanishes, FN returns
    ((0, 1), (0, 0), (1, 0), (2, 0)),
    ((0, 1), (1, 0), (0, 0), (1, 0)),  # FP rises then falls
    ((0, 2), (0, 1), (0, 0), (1, 0)),
)
_FP_LOOP = ((0, 0), (1, 0), (0, 0), (1, 0))
_FN_LOOP = ((0, 1), (0, 0), (0, 1), (0, 0))


def binary_unbalanced(n: int, p: int, imbalance: float = 0.1, seed: int = 0,
                      separation: float = 1.0, margin: float | None = None):
    """Gaussian features with class-dependent means; returns ``(X, y)``.

    ``round(imbalance * n)`` examples are positive. Positives have mean
    ``+separation`` and negatives ``-separation`` on the first feature.
    With ``margin`` set, the first feature is instead
    ``y * (margin + |z|)``, which makes the classes linearly separable.
    """
    if n < 4 or p < 1:
        raise ValueError("need n >= 4 and p >= 1")
    if not 0 < imbalance < 1:
        raise ValueError("imbalance must be in (0, 1)")
    n_pos = min(max(int(round(imbalance * n)), 1), n - 1)
    rng = np.random.default_rng(seed)
    y = -np.ones(n, dtype=int)
    y[rng.permutation(n)[:n_pos]] = 1
    X = rng.standard_normal((n, p))
    if margin is None:
        X[:, 0] += separation * y
    else:
        X[:, 0] = y * (margin + np.abs(X[:, 0]))
    return X, y


def changepoint_nonmono(n: int, p: int, seed: int = 0):
    """Changepoint-style error functions with ROC loops; returns ``(X, model)``.

    Every example gets three breakpoints. The first two examples carry a
    false-positive loop and a false-negative loop whose breakpoint
    spacing interleaves for some relative shift of their predictions, so
    AUC above 1 is reachable along a line search; the others draw from
    a few monotone and non-monotone templates. Rates are normalized to
    global totals.
    """
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    rng = np.random.default_rng(seed)
    value, dfp, dfn, example = [], [], [], []
    gap = rng.uniform(0.5, 2.0)
    for i in range(n):
        if i == 0:
            states = _FP_LOOP
            vals = rng.normal() + gap * np.array([0.0, 2.0, 4.0])
        elif i == 1:
            states = _FN_LOOP
            vals = rng.normal() + gap * np.array([-0.5, 1.0, 3.0])
        else:
            states = _TEMPLATES[rng.integers(len(_TEMPLATES))]
            vals = rng.normal() + np.cumsum(rng.exponential(1.0, 3))
        for k in range(3):
            value.append(vals[k])
            dfp.append(states[k + 1][0] - states[k][0])
            dfn.append(states[k + 1][1] - states[k][1])
            example.append(i)
    raw = ErrorModel(value, dfp, dfn, example, n)
    model = normalize(raw)
    try:
        model.validate()
    except ValidationError as err:  # pragma: no cover - templates are valid
        raise AssertionError(f"generator produced invalid model: {err}") from err
    X = rng.standard_normal((n, p))
    return X, model
