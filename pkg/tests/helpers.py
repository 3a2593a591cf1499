"""Random instances and brute-force reference computations shared by tests."""
from __future__ import annotations

import numpy as np

from aumline.error_model import ErrorModel, ValidationError, binary_breakpoints, normalize
from aumline.path import lines_from_predictions


def random_binary(rng, n=None, p=None):
    """``(X, model, w, d)`` for a binary problem with both classes present."""
    n = int(rng.integers(2, 31)) if n is None else n
    p = int(rng.integers(1, 6)) if p is None else p
    y = rng.choice([-1, 1], size=n)
    y[rng.permutation(n)[:2]] = [-1, 1]
    X = rng.standard_normal((n, p))
    return X, binary_breakpoints(y), rng.standard_normal(p), rng.standard_normal(p)


def random_changepoint(rng, n=None, max_breaks=5, levels=3):
    """Random changepoint-style error model with possibly looping rates.

    Per example, FP counts start at 0 and FN counts end at 0; both wander
    over ``0 .. levels-1`` in between. Models whose per-example rates
    exceed the normalized totals are redrawn.
    """
    n = int(rng.integers(2, 11)) if n is None else n
    while True:
        value, dfp, dfn, example = [], [], [], []
        for i in range(n):
            k = int(rng.integers(1, max_breaks + 1))
            fp = np.r_[0, rng.integers(0, levels, k)]
            fn = np.r_[rng.integers(0, levels, k), 0]
            for b in range(k):
                if fp[b + 1] == fp[b] and fn[b + 1] == fn[b]:
                    fp[b + 1] = fp[b] + 1
            vals = np.sort(rng.uniform(-3, 3, k))
            value.extend(vals)
            dfp.extend(np.diff(fp))
            dfn.extend(np.diff(fn))
            example.extend([i] * k)
        try:
            return normalize(ErrorModel(value, dfp, dfn, example, n)).validate()
        except ValidationError:
            continue


def random_instance(rng, kind):
    """``(X, model, w, d)``; changepoint features have p in [1, 5]."""
    if kind == "binary":
        return random_binary(rng)
    model = random_changepoint(rng)
    p = int(rng.integers(1, 6))
    X = rng.standard_normal((model.n_examples, p))
    return X, model, rng.standard_normal(p), rng.standard_normal(p)


def loop_model():
    """Two examples whose ROC curve loops: an FP loop and an FN loop."""
    return ErrorModel(
        value=[0.0, 1.0, 4.0, 0.5, 5.0, 7.0],
        delta_fp=[1, -1, 1, 0, 0, 0],
        delta_fn=[0, 0, 0, -1, 1, -1],
        example=[0, 0, 0, 1, 1, 1],
        n_examples=2).validate()


def loop_lines():
    return lines_from_predictions(np.zeros(2), np.array([-2.0, 0.0]), loop_model())


def rates_at(c, thr, model):
    """Global (FP, FN) when the constant ``c`` is added, by direct summation."""
    on = thr <= c
    return (float(np.sum(model.delta_fp[on])),
            model.fn_start + float(np.sum(model.delta_fn[on])))


def brute_aum_auc(pred, model, tol=1e-9):
    """AUM and AUC from rates evaluated inside every threshold interval.

    Thresholds closer than ``tol`` are one ROC point. This shares no code
    with the library beyond the error model.
    """
    thr = model.value - np.asarray(pred, dtype=float)[model.example]
    cuts = []
    for t in sorted(thr):
        if not cuts or t - cuts[-1] > tol:
            cuts.append(t)
    probes = [cuts[0] - 1.0] + [(a + b) / 2 for a, b in zip(cuts, cuts[1:])] + [cuts[-1] + 1.0]
    rates = [rates_at(c, thr, model) for c in probes]
    aum = sum((b - a) * min(rates[k + 1]) for k, (a, b) in enumerate(zip(cuts, cuts[1:])))
    auc = sum((f1 - f0) * ((1 - n1) + (1 - n0)) / 2
              for (f0, n0), (f1, n1) in zip(rates, rates[1:]))
    return aum, auc


def recompute_from_perm(state):
    """Slope and AUC implied by ``state.perm``, recomputed in O(B)."""
    perm = np.asarray(state.perm)
    dfp = np.asarray(state.dfp)[perm]
    dfn = np.asarray(state.dfn)[perm]
    fp = np.r_[0.0, np.cumsum(dfp)]
    fn = np.r_[state.fn[0], state.fn[0] + np.cumsum(dfn)]
    m = np.minimum(fp, fn)
    B = state.B
    slope = float(np.sum(np.diff(np.asarray(state.slopes)[perm]) * m[1:B]))
    auc = float(np.sum(np.diff(fp) * (2.0 - fn[1:] - fn[:-1])) / 2)
    return slope, auc
